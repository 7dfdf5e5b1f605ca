"""Image reconstruction from normalized response magnitudes.

For an estimate ``J`` with responses ``z_c = J * h_c`` the per-pixel feature is

    b_c(p) = |z_c(p)|^2 / sum_c' |z_c'(p)|^2

and the error against the source image's features ``a_c`` is
``E(J) = sum_p sum_c (a_c(p) - b_c(p))^2``. ``E`` is unchanged by ``J -> k*J``
for any ``k != 0``, so a reconstruction is recovered up to sign and gain.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import fft as sfft

from .convolution import fft_shape
from .errors import NumericError, ParameterError
from .filterbank import FilterBank, FilterParams, make_bank
from .imageio import check_image

# pixels whose magnitude norm is below this carry a zero feature vector
NORM_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class ReconProblem:
    target: np.ndarray  # (n_channels, h, w)
    bank: FilterBank
    shape: tuple[int, int]
    _fft_shape: tuple[int, int] = field(init=False, repr=False)

    def __post_init__(self):
        if self.bank.params.hole_enabled:
            raise ParameterError("reconstruction needs a bank without the center hole")
        object.__setattr__(self, "_fft_shape", fft_shape(self.shape, self.bank.size))

    def forward(self, img: np.ndarray) -> np.ndarray:
        """Same-size responses of ``img`` to every kernel."""
        h, w = self.shape
        r = self.bank.size // 2
        kf = self.bank.kernel_fft(self._fft_shape)
        full = sfft.ifft2(kf * sfft.fft2(img, s=self._fft_shape)[None], axes=(-2, -1))
        return full[:, r : r + h, r : r + w]

    def adjoint(self, g: np.ndarray) -> np.ndarray:
        """Gradient w.r.t. the image of ``sum Re(conj(g) z)``, i.e. the transpose of
        :meth:`forward` applied to complex cotangents ``g``."""
        h, w = self.shape
        r = self.bank.size // 2
        kf = self.bank.kernel_fft(self._fft_shape)
        padded = np.zeros((g.shape[0],) + self._fft_shape, dtype=np.complex128)
        padded[:, r : r + h, r : r + w] = g
        gf = sfft.fft2(padded, axes=(-2, -1))
        corr = sfft.ifft2((gf * np.conj(kf)).sum(axis=0))
        return corr[:h, :w].real


def normalized_energy(z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-pixel ``|z|^2 / sum_c |z|^2`` plus the denominator and validity mask."""
    q = z.real**2 + z.imag**2
    s = q.sum(axis=0)
    valid = s > NORM_FLOOR**2
    b = np.zeros_like(q)
    b[:, valid] = q[:, valid] / s[valid]
    return b, s, valid


def reconstruction_bank(
    alpha: float, kernel_size: int = 17, circular: bool = True, **kw
) -> FilterBank:
    """Default frequency grid with the hole disabled (center pixel still zero)."""
    return make_bank(
        FilterParams(alpha=alpha, kernel_size=kernel_size, hole_enabled=False, circular=circular, **kw)
    )


def make_problem(img: np.ndarray, bank: FilterBank) -> ReconProblem:
    img = check_image(img)
    # the target is built from the source image's features only
    probe = ReconProblem(np.zeros((len(bank),) + img.shape), bank, img.shape)
    target, _, _ = normalized_energy(probe.forward(img))
    return ReconProblem(target, bank, img.shape)


def _check(img: np.ndarray, problem: ReconProblem) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.shape != problem.shape:
        raise ParameterError(f"estimate shape {img.shape} != problem shape {problem.shape}")
    return img


def recon_error(img: np.ndarray, problem: ReconProblem) -> float:
    img = _check(img, problem)
    b, _, _ = normalized_energy(problem.forward(img))
    return float(((b - problem.target) ** 2).sum())


def recon_value_and_grad(img: np.ndarray, problem: ReconProblem) -> tuple[float, np.ndarray]:
    img = _check(img, problem)
    z = problem.forward(img)
    b, s, valid = normalized_energy(z)
    diff = b - problem.target
    err = float((diff**2).sum())
    g = 2.0 * diff
    # quotient rule through b_c = q_c / s
    dq = np.zeros_like(g)
    dq[:, valid] = (g[:, valid] - (g[:, valid] * b[:, valid]).sum(axis=0)) / s[valid]
    # d q / d z = 2 z for the real and imaginary parts
    return err, problem.adjoint(2.0 * dq * z)


def recon_grad(img: np.ndarray, problem: ReconProblem) -> np.ndarray:
    return recon_value_and_grad(img, problem)[1]


@dataclass
class ReconResult:
    image: np.ndarray
    trace: list[float]
    steps: list[float]
    iterations: int
    converged: bool
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)


def reconstruct(
    problem: ReconProblem,
    seed: int = 0,
    iters: int = 5000,
    eta0: float | None = None,
    *,
    init: np.ndarray | None = None,
    snapshot_every: int = 0,
    patience: int = 50,
    rel_tol: float = 1e-7,
) -> ReconResult:
    """Gradient descent with backtracking from a uniform random start.

    A step is accepted only if it lowers the error; otherwise the step size is
    halved. After an accepted step the step size doubles, capped at ``eta0``.
    The default ``eta0`` moves the initial estimate by its own RMS value.
    Iteration stops early when the error improves by less than ``rel_tol``
    (relative) over ``patience`` iterations.
    """
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, problem.shape) if init is None else _check(init, problem).copy()
    err, grad = recon_value_and_grad(x, problem)
    if eta0 is None:
        gnorm = np.sqrt(np.mean(grad**2))
        eta0 = float(np.sqrt(np.mean(x**2)) / gnorm) if gnorm > 0 else 1.0
    eta = eta0
    trace = [err]
    steps = []
    snaps = {0: x.copy()} if snapshot_every else {}
    converged = False
    it = 0
    for it in range(1, iters + 1):
        if not np.all(np.isfinite(grad)):
            raise NumericError(f"non-finite gradient at iteration {it}")
        accepted = False
        while eta > eta0 * 1e-16:
            cand = x - eta * grad
            cand_err, cand_grad = recon_value_and_grad(cand, problem)
            if cand_err < err:
                accepted = True
                break
            eta *= 0.5
        if not accepted:
            converged = True
            break
        x, err, grad = cand, cand_err, cand_grad
        steps.append(eta)
        eta = min(2.0 * eta, eta0)
        trace.append(err)
        if snapshot_every and it % snapshot_every == 0:
            snaps[it] = x.copy()
        if len(trace) > patience:
            old = trace[-1 - patience]
            if old - err <= rel_tol * old:
                converged = True
                break
    return ReconResult(x, trace, steps, it, converged, snaps)


def abs_correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Absolute Pearson correlation; blind to the global sign ambiguity."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    a = a - a.mean()
    b = b - b.mean()
    den = np.linalg.norm(a) * np.linalg.norm(b)
    return float(abs(a @ b) / den) if den > 0 else 0.0


def to_display(img: np.ndarray) -> np.ndarray:
    """Min-max stretch to ``[0, 1]`` for saving a reconstruction as an image."""
    lo, hi = float(img.min()), float(img.max())
    return np.zeros_like(img) if hi <= lo else (img - lo) / (hi - lo)


def write_trace_csv(trace: list[float], path: str | Path) -> None:
    with open(path, "w") as fh:
        fh.write("iteration,error\n")
        for i, e in enumerate(trace):
            fh.write(f"{i},{e!r}\n")
