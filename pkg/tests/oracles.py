"""Independent reference implementations used as test oracles.

Everything here is deliberately naive (forward Euler, brute-force loops,
finite differences) and shares no code with the package paths it checks.
"""

import numpy as np


def explicit_heat_run(u0, alpha, dt, n_steps, dx=1.0, dy=1.0, u_inf=72.0,
                      forcing_fn=None):
    """Forward-Euler heat stepping with Dirichlet boundaries at u_inf.

    ``forcing_fn(u)`` returns the source grid for the current field (or
    None for no forcing). Caller is responsible for picking a stable dt.
    """
    u = np.array(u0, dtype=float, copy=True)
    fx = alpha * dt / dx**2
    fy = alpha * dt / dy**2
    for _ in range(n_steps):
        f = forcing_fn(u) if forcing_fn is not None else 0.0
        lap = np.zeros_like(u)
        lap[1:-1, 1:-1] = (
            fx * (u[:-2, 1:-1] - 2.0 * u[1:-1, 1:-1] + u[2:, 1:-1])
            + fy * (u[1:-1, :-2] - 2.0 * u[1:-1, 1:-1] + u[1:-1, 2:])
        )
        u = u + lap + (f if np.isscalar(f) else f) * dt
        u[0, :] = u_inf
        u[-1, :] = u_inf
        u[:, 0] = u_inf
        u[:, -1] = u_inf
    return u


def central_difference(f, x, eps=1e-3):
    """Central finite-difference derivative of scalar f at scalar x."""
    return (f(x + eps) - f(x - eps)) / (2.0 * eps)


def grad_check_coords(loss_at, array, coords, eps=1e-3):
    """Numeric gradient of ``loss_at()`` w.r.t. selected coords of ``array``.

    ``loss_at`` re-evaluates the loss using the current contents of
    ``array``; entries are perturbed in place and restored.
    """
    grads = np.zeros(len(coords))
    for n, idx in enumerate(coords):
        orig = array[idx]
        array[idx] = orig + eps
        hi = loss_at()
        array[idx] = orig - eps
        lo = loss_at()
        array[idx] = orig
        grads[n] = (hi - lo) / (2.0 * eps)
    return grads


def brute_force_theta(rows):
    """Pastille count by explicit mask iteration."""
    total = 0
    for row in rows:
        for cell in row.mask:
            if cell:
                total += 1
    return total
