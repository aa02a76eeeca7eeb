"""Independent reference implementations used only by the tests.

Everything here works on full 2^n x 2^n matrices built with explicit loops
or Kronecker products, so it shares no code path with the tensor simulator.
"""
import numpy as np

I2 = np.eye(2, dtype=complex)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def ry(theta):
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def embed(u, qubits, n):
    """Full operator of a gate on ``qubits`` (qubit 0 is the most significant bit)."""
    k = len(qubits)
    dim = 2 ** n
    full = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - q)) & 1 for q in range(n)]
        sub_in = 0
        for q in qubits:
            sub_in = (sub_in << 1) | bits[q]
        for sub_out in range(2 ** k):
            amp = u[sub_out, sub_in]
            if amp == 0:
                continue
            out_bits = list(bits)
            for j, q in enumerate(qubits):
                out_bits[q] = (sub_out >> (k - 1 - j)) & 1
            row = 0
            for b in out_bits:
                row = (row << 1) | b
            full[row, col] += amp
    return full


def circuit_unitary(gates, n):
    u = np.eye(2 ** n, dtype=complex)
    for g in gates:
        if not g.injected:
            u = embed(g.matrix(), g.qubits, n) @ u
    return u


def sequence_unitary(gates):
    u = I2.copy()
    for g in gates:
        u = g.matrix() @ u
    return u


def phase_distance(a, b):
    """||a - e^{i phi} b|| with the phase that best aligns the two."""
    overlap = np.trace(b.conj().T @ a)
    phase = overlap / abs(overlap) if abs(overlap) > 1e-300 else 1.0
    return float(np.linalg.norm(a - phase * b))


def depolarize_kraus(p):
    return [np.sqrt(1 - 3 * p / 4) * I2, np.sqrt(p / 4) * X, np.sqrt(p / 4) * Y, np.sqrt(p / 4) * Z]


def apply_kraus(rho, kraus, qubits, n):
    out = np.zeros_like(rho)
    for k in kraus:
        full = embed(k, qubits, n)
        out += full @ rho @ full.conj().T
    return out


def noisy_density(gates, n, p1, p2):
    """Gate-by-gate depolarizing evolution; no thermal noise."""
    rho = np.zeros((2 ** n, 2 ** n), dtype=complex)
    rho[0, 0] = 1
    p_local = 1 - np.sqrt(1 - p2)
    for g in gates:
        u = embed(g.matrix(), g.qubits, n)
        rho = u @ rho @ u.conj().T
        if g.injected:
            continue
        if g.arity == 1:
            rho = apply_kraus(rho, depolarize_kraus(p1), g.qubits, n)
        else:
            for q in g.qubits:
                rho = apply_kraus(rho, depolarize_kraus(p_local), (q,), n)
    return rho


def random_density(n, rng):
    a = rng.normal(size=(2 ** n, 2 ** n)) + 1j * rng.normal(size=(2 ** n, 2 ** n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def zne_quadratic_oracle(x1, x3, x5):
    """Zero-noise value of the interpolating parabola by a 3x3 linear solve."""
    lam = np.array([1.0, 3.0, 5.0])
    vander = np.column_stack([np.ones(3), lam, lam ** 2])
    return float(np.linalg.solve(vander, [x1, x3, x5])[0])


_LAM = np.array([1.0, 3.0, 5.0])
_GRID = np.concatenate([-np.geomspace(5, 1e-3, 400), np.geomspace(1e-3, 5, 400)])
_E = np.exp(np.outer(_GRID, _LAM))
_EC = _E - _E.mean(axis=1, keepdims=True)


def _exp_residual(c, x):
    e = np.exp(c * _LAM)
    ec = e - e.mean()
    xc = x - x.mean()
    b = ec @ xc / (ec @ ec)
    return float(np.linalg.norm(xc - b * ec)), x.mean() - b * e.mean(), b


def zne_exponential_oracle(x1, x3, x5):
    """Brute-force least-squares fit of a + b exp(c lambda): dense grid in c, then bounded refinement."""
    from scipy.optimize import minimize_scalar

    x = np.array([x1, x3, x5], dtype=float)
    xc = x - x.mean()
    b = _EC @ xc / np.einsum("ij,ij->i", _EC, _EC)
    r = np.linalg.norm(xc[None, :] - b[:, None] * _EC, axis=1)
    k = int(np.argmin(r))
    lo, hi = _GRID[max(k - 1, 0)], _GRID[min(k + 1, len(_GRID) - 1)]
    res = minimize_scalar(lambda c: _exp_residual(c, x)[0], bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-14})
    _, a, b = _exp_residual(res.x, x)
    return float(a + b)
