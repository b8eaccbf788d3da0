"""Reference computations that avoid the package's own algebra."""
import numpy as np
from scipy import integrate, linalg, signal


def hurwitz_by_roots(coeffs_low_first) -> bool:
    r = np.roots(np.asarray(coeffs_low_first, dtype=float)[::-1])
    return bool(np.all(r.real < 0))


def zoh_scalar(a: float, b: float, Ts: float) -> tuple[float, float]:
    """Closed-form ZOH of x' = a x + b u."""
    if a == 0:
        return 1.0, b * Ts
    ad = np.exp(a * Ts)
    return ad, (ad - 1.0) / a * b


def zoh_by_quadrature(A, B, Ts):
    """ZOH via expm(A Ts) and numerical quadrature of the input integral."""
    Ad = linalg.expm(A * Ts)
    Bd, _ = integrate.quad_vec(lambda tau: linalg.expm(A * tau) @ B, 0.0, Ts, epsabs=1e-14, epsrel=1e-13)
    return Ad, Bd


def two_finger_response(t_eval, amplitude=np.pi / 3, omega_c=5.0, gain=7.831,
                        channels=((2.66, 3.61), (2.45, 3.06)), max_step=1e-3):
    """Continuous outputs of the filtered averaged-inverse feedforward, by dense integration.

    Built from raw coefficients with numpy polynomial products:
    Y_i = g / d_i * (w/(s+w))^2 * A/s * (sum_j d_j) / (n g).
    """
    n = len(channels)
    dens = [np.array([1.0, c, k, 0.0]) for c, k in channels]
    dsum = sum(dens)
    filt = np.polymul([1.0, omega_c], [1.0, omega_c])
    out = []
    for d in dens:
        num = gain * omega_c ** 2 * amplitude * dsum / (n * gain)
        den = np.polymul(np.polymul(d, filt), [1.0, 0.0])
        A, B, C, D = signal.tf2ss(num, den)
        # the output transform is Y(s) itself: impulse response = free response from x0 = B
        sol = integrate.solve_ivp(lambda t, x: A @ x, (0.0, t_eval[-1]), B[:, 0], t_eval=t_eval,
                                  max_step=max_step, rtol=1e-10, atol=1e-12, method="RK45")
        out.append((C @ sol.y)[0])
    return np.array(out).T
