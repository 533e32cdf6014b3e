"""Gaussian Process regression with a scaled anisotropic RBF kernel.

One GP is trained per response on ``design ⊕ corner-shift`` inputs, both
min-max normalized to the unit cube, with standardized targets and a zero
prior mean. Hyperparameters maximize the log marginal likelihood through a
deterministic coarse log-grid followed by coordinate-wise golden-section
refinement.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .core import Direction, Evaluation, Individual, ProblemSpec, Source

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class KernelParams:
    signal_variance: float
    lengthscales: np.ndarray
    noise_variance: float

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        object.__setattr__(self, "lengthscales", ls)
        values = np.r_[self.signal_variance, ls, self.noise_variance]
        if not np.all(np.isfinite(values)) or self.signal_variance <= 0 or np.any(ls <= 0):
            raise ValueError("kernel parameters must be finite and strictly positive")
        if self.noise_variance < 0:
            raise ValueError("noise_variance must be non-negative")


def rbf_kernel(A: np.ndarray, B: np.ndarray, params: KernelParams) -> np.ndarray:
    A = A / params.lengthscales
    B = B / params.lengthscales
    sq = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return params.signal_variance * np.exp(-0.5 * sq)


def _cholesky_with_jitter(K: np.ndarray):
    """Lower Cholesky factor of ``K``, escalating diagonal jitter on failure.

    Jitter starts at ``1e-8 * trace(K) / n`` and grows tenfold up to
    ``1e-2 * trace(K) / n``.
    """
    n = K.shape[0]
    scale = max(np.trace(K) / n, 1e-300)
    rel = 1e-8
    while rel <= 1e-2 * (1 + 1e-9):
        jitter = rel * scale
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(n))
            return L, jitter
        except np.linalg.LinAlgError:
            rel *= 10.0
    raise np.linalg.LinAlgError("Gram matrix is not positive definite even with maximum jitter")


class RBFGaussianProcess(RegressorMixin, BaseEstimator):
    """Exact GP regressor with zero prior mean on standardized targets.

    Parameters
    ----------
    signal_variance, lengthscales, noise_variance : float, array-like or None
        Fixed hyperparameters in standardized-target units. When all three
        are given and ``optimize=False`` no search is performed.
    optimize : bool
        Search hyperparameters by maximizing the log marginal likelihood.
    lengthscale_bounds, signal_variance_bounds, noise_variance_bounds : tuple
        Search box for each parameter group.
    grid_points : int
        Coarse log-grid points per group (shared lengthscale, signal, noise).
    refine_iters : int
        Golden-section iterations per coordinate in the refinement sweep.
    hyper_subsample : int
        Maximum number of rows used for the hyperparameter search; the
        final factorization always uses every training row.
    train_cap : int
        Maximum number of training rows accepted by :meth:`fit`.
    warm_start : bool
        Refit from the previously found hyperparameters: skip the grid and
        refine within half a grid step using ``warm_refine_iters`` iterations.
    warm_refine_iters : int
        Golden-section iterations per coordinate for warm refits.
    """

    def __init__(self, signal_variance=None, lengthscales=None, noise_variance=None,
                 optimize=True, lengthscale_bounds=(0.03, 30.0),
                 signal_variance_bounds=(0.05, 20.0), noise_variance_bounds=(1e-6, 0.5),
                 grid_points=5, refine_iters=10, hyper_subsample=200, train_cap=2000,
                 warm_start=False, warm_refine_iters=4):
        self.signal_variance = signal_variance
        self.lengthscales = lengthscales
        self.noise_variance = noise_variance
        self.optimize = optimize
        self.lengthscale_bounds = lengthscale_bounds
        self.signal_variance_bounds = signal_variance_bounds
        self.noise_variance_bounds = noise_variance_bounds
        self.grid_points = grid_points
        self.refine_iters = refine_iters
        self.hyper_subsample = hyper_subsample
        self.train_cap = train_cap
        self.warm_start = warm_start
        self.warm_refine_iters = warm_refine_iters

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        n, d = X.shape
        if n < 2:
            raise ValueError("at least two training points are required")
        if n > self.train_cap:
            raise ValueError(f"{n} training rows exceed train_cap={self.train_cap}; subsample first")
        self.y_mean_ = float(y.mean())
        std = float(y.std())
        self.y_std_ = std if std > 0 else 1.0
        z = (y - self.y_mean_) / self.y_std_

        if self.optimize:
            params = self._search(X, z)
        else:
            if self.signal_variance is None or self.lengthscales is None or self.noise_variance is None:
                raise ValueError("optimize=False needs every hyperparameter set")
            ls = np.broadcast_to(np.asarray(self.lengthscales, dtype=float), (d,)).copy()
            params = KernelParams(float(self.signal_variance), ls, float(self.noise_variance))

        K = rbf_kernel(X, X, params) + params.noise_variance * np.eye(n)
        self.L_, self.jitter_ = _cholesky_with_jitter(K)
        self.alpha_ = cho_solve((self.L_, True), z)
        # explicit L^-1 turns the predictive variance into one GEMM
        self.L_inv_ = solve_triangular(self.L_, np.eye(n), lower=True, check_finite=False)
        self.kernel_ = params
        self.X_train_ = X
        self.y_train_ = z
        self.log_marginal_likelihood_value_ = float(
            -0.5 * z @ self.alpha_ - np.log(np.diag(self.L_)).sum() - 0.5 * n * _LOG_2PI
        )
        self.n_features_in_ = d
        return self

    def predict(self, X, return_std=False):
        check_is_fitted(self, "alpha_")
        X = check_array(X)
        if np.any(X < 0.0) or np.any(X > 1.0):
            warnings.warn("query outside the unit cube; clamping", RuntimeWarning, stacklevel=2)
            X = np.clip(X, 0.0, 1.0)
        Ks = rbf_kernel(X, self.X_train_, self.kernel_)
        mean = Ks @ self.alpha_ * self.y_std_ + self.y_mean_
        if not return_std:
            return mean
        v = Ks @ self.L_inv_.T
        var = self.kernel_.signal_variance - np.einsum("ij,ij->i", v, v)
        return mean, np.sqrt(np.maximum(var, 0.0)) * self.y_std_

    # -- hyperparameter search ----------------------------------------------

    def _search(self, X, z):
        n, d = X.shape
        rows = _strided(n, self.hyper_subsample)
        Xs, zs = X[rows], z[rows]
        sqdiff = (Xs[:, None, :] - Xs[None, :, :]) ** 2
        eye = np.eye(len(rows))

        def nlml(theta):
            ls2 = np.exp(2.0 * theta[:d])
            sv, nv = math.exp(theta[d]), math.exp(theta[d + 1])
            K = sv * np.exp(-0.5 * (sqdiff @ (1.0 / ls2))) + (nv + 1e-8 * sv) * eye
            try:
                L = np.linalg.cholesky(K)
            except np.linalg.LinAlgError:
                return np.inf
            a = cho_solve((L, True), zs, check_finite=False)
            return 0.5 * zs @ a + np.log(np.diag(L)).sum()

        return _maximize_evidence(self, nlml, d)


def _strided(n: int, m: int) -> np.ndarray:
    """``min(n, m)`` evenly spaced indices into ``range(n)``."""
    if m >= n:
        return np.arange(n)
    return np.linspace(0, n - 1, max(m, 2)).round().astype(int)


def _maximize_evidence(est, nlml, d: int) -> KernelParams:
    """Grid-plus-golden-section minimization of ``nlml`` over log hyperparameters.

    ``theta`` is ``[log lengthscales (d), log signal variance, log noise]``.
    The grid shares one lengthscale across inputs; refinement then moves each
    coordinate within one grid step. With ``est.warm_start`` and a previous
    fit the grid is skipped and refinement uses half steps.
    """
    lo = np.log(np.r_[[est.lengthscale_bounds[0]] * d,
                      est.signal_variance_bounds[0], est.noise_variance_bounds[0]])
    hi = np.log(np.r_[[est.lengthscale_bounds[1]] * d,
                      est.signal_variance_bounds[1], est.noise_variance_bounds[1]])
    g = est.grid_points
    steps = (hi - lo) / max(g - 1, 1)
    previous = getattr(est, "kernel_", None) if est.warm_start else None
    if previous is not None and len(previous.lengthscales) == d:
        best = np.clip(np.log(np.r_[previous.lengthscales, previous.signal_variance,
                                    previous.noise_variance]), lo, hi)
        return _refine(nlml, best, nlml(best), lo, hi, steps / 2.0, est.warm_refine_iters)
    best, best_val = None, np.inf
    for a in np.linspace(lo[0], hi[0], g):
        for b in np.linspace(lo[d], hi[d], g):
            for c in np.linspace(lo[d + 1], hi[d + 1], g):
                theta = np.r_[[a] * d, b, c]
                val = nlml(theta)
                if val < best_val:
                    best, best_val = theta, val
    if best is None:
        raise np.linalg.LinAlgError("no grid point produced a positive definite Gram matrix")
    return _refine(nlml, best, best_val, lo, hi, steps, est.refine_iters)


def _refine(nlml, best, best_val, lo, hi, steps, iters) -> KernelParams:
    d = len(best) - 2
    for coord in range(d + 2):
        a = max(lo[coord], best[coord] - steps[coord])
        b = min(hi[coord], best[coord] + steps[coord])
        theta = best.copy()

        def f(t):
            theta[coord] = t
            return nlml(theta)

        c1 = b - _INV_PHI * (b - a)
        c2 = a + _INV_PHI * (b - a)
        f1, f2 = f(c1), f(c2)
        cand = [(f1, c1), (f2, c2)]
        for _ in range(iters):
            if f1 <= f2:
                b, c2, f2 = c2, c1, f1
                c1 = b - _INV_PHI * (b - a)
                f1 = f(c1)
                cand.append((f1, c1))
            else:
                a, c1, f1 = c1, c2, f2
                c2 = a + _INV_PHI * (b - a)
                f2 = f(c2)
                cand.append((f2, c2))
        val, t = min(cand, key=lambda p: p[0])
        if val < best_val:
            best = best.copy()
            best[coord] = t
            best_val = val
    return KernelParams(math.exp(best[d]), np.exp(best[:d]), math.exp(best[d + 1]))


def _sqdist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Per-dimension squared differences, shape ``(len(A), len(B), dims)``."""
    return (A[:, None, :] - B[None, :, :]) ** 2


class GridRBFGaussianProcess(BaseEstimator):
    """The RBF GP of :class:`RBFGaussianProcess` on a complete design x corner grid.

    When every training design is observed at the same ``C`` corner inputs,
    the Gram matrix is ``sv * Kx (x) Ks + noise * I`` and both factors can be
    eigendecomposed separately. Posterior and evidence are identical to the
    dense model on the flattened rows (design-major, corner-minor) while
    costing ``O(n^3 + C^3)`` instead of ``O((nC)^3)``.

    :meth:`fit` takes ``Xd`` ``(n, D)``, ``Xs`` ``(C, S)`` and ``Y`` ``(n, C)``;
    :meth:`predict` returns ``(q, C)`` arrays for the training corners.
    ``hyper_subsample`` counts rows, so the search uses
    ``hyper_subsample // C`` evenly strided designs. Jitter matches the dense
    model's first attempt, ``1e-8 * (sv + noise)``.
    """

    def __init__(self, lengthscale_bounds=(0.03, 30.0), signal_variance_bounds=(0.05, 20.0),
                 noise_variance_bounds=(1e-6, 0.5), grid_points=5, refine_iters=10,
                 hyper_subsample=200, train_cap=2000, warm_start=False, warm_refine_iters=4,
                 signal_variance=None, lengthscales=None, noise_variance=None, optimize=True):
        self.lengthscale_bounds = lengthscale_bounds
        self.signal_variance_bounds = signal_variance_bounds
        self.noise_variance_bounds = noise_variance_bounds
        self.grid_points = grid_points
        self.refine_iters = refine_iters
        self.hyper_subsample = hyper_subsample
        self.train_cap = train_cap
        self.warm_start = warm_start
        self.warm_refine_iters = warm_refine_iters
        self.signal_variance = signal_variance
        self.lengthscales = lengthscales
        self.noise_variance = noise_variance
        self.optimize = optimize

    @staticmethod
    def _eig(sq, inv_ls2):
        K = np.exp(-0.5 * (sq @ inv_ls2))
        lam, Q = np.linalg.eigh(K)
        return np.maximum(lam, 0.0), Q

    def _spectrum(self, sq_d, sq_s, params):
        D = sq_d.shape[-1]
        inv = 1.0 / params.lengthscales ** 2
        lx, Qx = self._eig(sq_d, inv[:D])
        ls, Qs = self._eig(sq_s, inv[D:])
        sv, nv = params.signal_variance, params.noise_variance
        E = sv * np.outer(lx, ls) + nv + 1e-8 * (sv + nv)
        return Qx, Qs, E

    def fit(self, Xd, Xs, Y):
        Xd = check_array(Xd)
        Xs = check_array(Xs, ensure_min_features=0) if np.size(Xs) else np.zeros((np.shape(Y)[1], 0))
        Y = check_array(Y)
        n, C = Y.shape
        if Xd.shape[0] != n or Xs.shape[0] != C:
            raise ValueError(f"Y must be ({Xd.shape[0]}, {Xs.shape[0]}), got {Y.shape}")
        if n * C < 2:
            raise ValueError("at least two training points are required")
        if n * C > self.train_cap:
            raise ValueError(f"{n * C} training rows exceed train_cap={self.train_cap}; subsample first")
        self.y_mean_ = float(Y.mean())
        std = float(Y.std())
        self.y_std_ = std if std > 0 else 1.0
        Z = (Y - self.y_mean_) / self.y_std_
        sq_d, sq_s = _sqdist(Xd, Xd), _sqdist(Xs, Xs)
        D = Xd.shape[1]
        d = D + Xs.shape[1]

        if self.optimize:
            rows = _strided(n, max(2, self.hyper_subsample // C))
            sub_d, Zs = sq_d[np.ix_(rows, rows)], Z[rows]

            def nlml(theta):
                p = KernelParams(math.exp(theta[d]), np.exp(theta[:d]), math.exp(theta[d + 1]))
                Qx, Qs, E = self._spectrum(sub_d, sq_s, p)
                Zt = Qx.T @ Zs @ Qs
                return 0.5 * float((Zt * Zt / E).sum()) + 0.5 * float(np.log(E).sum())

            params = _maximize_evidence(self, nlml, d)
        else:
            if self.signal_variance is None or self.lengthscales is None or self.noise_variance is None:
                raise ValueError("optimize=False needs every hyperparameter set")
            ls = np.broadcast_to(np.asarray(self.lengthscales, dtype=float), (d,)).copy()
            params = KernelParams(float(self.signal_variance), ls, float(self.noise_variance))

        Qx, Qs, E = self._spectrum(sq_d, sq_s, params)
        Zt = Qx.T @ Z @ Qs
        self.Qx_, self.Qs_, self.E_ = Qx, Qs, E
        self.alpha_ = Qx @ (Zt / E) @ Qs.T
        self.kernel_ = params
        self.Xd_train_, self.Xs_train_ = Xd, Xs
        self.log_marginal_likelihood_value_ = float(
            -0.5 * (Zt * Zt / E).sum() - 0.5 * np.log(E).sum() - 0.5 * n * C * _LOG_2PI
        )
        self.n_features_in_ = d
        return self

    def predict(self, Xd, return_std=False):
        check_is_fitted(self, "alpha_")
        Xd = check_array(Xd)
        if np.any(Xd < 0.0) or np.any(Xd > 1.0):
            warnings.warn("query outside the unit cube; clamping", RuntimeWarning, stacklevel=2)
            Xd = np.clip(Xd, 0.0, 1.0)
        p = self.kernel_
        D = Xd.shape[1]
        inv = 1.0 / p.lengthscales ** 2
        kx = np.exp(-0.5 * (_sqdist(Xd, self.Xd_train_) @ inv[:D]))
        ks = np.exp(-0.5 * (_sqdist(self.Xs_train_, self.Xs_train_) @ inv[D:]))
        sv = p.signal_variance
        mean = sv * (kx @ self.alpha_ @ ks.T) * self.y_std_ + self.y_mean_
        if not return_std:
            return mean
        A = kx @ self.Qx_
        B = ks @ self.Qs_
        var = sv - sv * sv * ((A * A) @ (1.0 / self.E_) @ (B * B).T)
        return mean, np.sqrt(np.maximum(var, 0.0)) * self.y_std_


def lcb(mean, std, K: float, direction: Direction = Direction.MINIMIZE):
    """Optimistic confidence bound: ``mean - K*std`` for minimized responses,
    ``mean + K*std`` for maximized ones."""
    if np.any(np.asarray(std) < 0):
        raise ValueError("std must be non-negative")
    if direction is Direction.MAXIMIZE:
        return mean + K * std
    return mean - K * std


class SurrogateBank:
    """One GP per response of a problem.

    Training rows are ``(design, corner)`` pairs taken from the most recent
    simulations, newest first, up to ``train_cap`` rows. The default
    template is :class:`GridRBFGaussianProcess`, which exploits the fact that
    every simulated design is evaluated on all corners; a
    :class:`RBFGaussianProcess` template fits the same model densely.
    """

    def __init__(self, spec: ProblemSpec, template=None, train_cap: int = 2000, n_jobs: int = 1):
        self.spec = spec
        self.template = template if template is not None else GridRBFGaussianProcess()
        self.train_cap = train_cap
        self.n_jobs = n_jobs
        lo, hi = spec.lower, spec.upper
        self._x_lo, self._x_span = lo, hi - lo
        shifts = spec.shifts
        s_lo = shifts.min(axis=0) if shifts.size else np.zeros(0)
        s_span = (shifts.max(axis=0) - s_lo) if shifts.size else np.zeros(0)
        self.corner_inputs = np.where(s_span > 0, (shifts - s_lo) / np.where(s_span > 0, s_span, 1.0), 0.0)
        self.models_ = None

    @property
    def _grid(self) -> bool:
        return isinstance(self.template, GridRBFGaussianProcess)

    def encode_designs(self, designs) -> np.ndarray:
        return (np.atleast_2d(np.asarray(designs, dtype=float)) - self._x_lo) / self._x_span

    def encode(self, designs) -> np.ndarray:
        """Inputs for every design x corner pair, shape ``(n * C, D + S)``."""
        X = self.encode_designs(designs)
        C = self.spec.n_corners
        return np.hstack([np.repeat(X, C, axis=0), np.tile(self.corner_inputs, (X.shape[0], 1))])

    def training_set(self, individuals: Sequence[Individual]):
        """Encoded designs ``(n, D)`` and responses ``(n, R, C)`` of the retained designs."""
        keep = max(1, self.train_cap // self.spec.n_corners)
        chosen = [ind for ind in individuals if ind.evaluation is not None][-keep:]
        X = self.encode_designs([ind.design for ind in chosen])
        Y = np.array([ind.evaluation.responses for ind in chosen])
        return X, Y

    def fit(self, individuals: Sequence[Individual]) -> "SurrogateBank":
        Xd, Y = self.training_set(individuals)
        n, R, C = Y.shape
        if self._grid:
            args = [(Xd, self.corner_inputs, Y[:, k, :]) for k in range(R)]
        else:
            X = np.hstack([np.repeat(Xd, C, axis=0), np.tile(self.corner_inputs, (n, 1))])
            args = [(X, Y[:, k, :].ravel()) for k in range(R)]
        previous = self.models_ if getattr(self.template, "warm_start", False) else None

        def fit_one(k):
            if previous is not None:
                model = previous[k]
            else:
                model = clone(self.template).set_params(train_cap=max(self.train_cap, 2))
            return model.fit(*args[k])

        if self.n_jobs > 1:
            with ThreadPoolExecutor(self.n_jobs) as pool:
                self.models_ = list(pool.map(fit_one, range(R)))
        else:
            self.models_ = [fit_one(k) for k in range(R)]
        return self

    def predict(self, designs):
        """Posterior mean and std, each shaped ``(n, R, C)``."""
        if self.models_ is None:
            raise RuntimeError("SurrogateBank is not fitted")
        C = self.spec.n_corners
        if self._grid:
            Xq = self.encode_designs(designs)
        else:
            Xq = self.encode(designs)
        n = Xq.shape[0] // (1 if self._grid else C)
        means, stds = [], []
        for model in self.models_:
            mu, sd = model.predict(Xq, return_std=True)
            means.append(mu.reshape(n, C))
            stds.append(sd.reshape(n, C))
        return np.stack(means, axis=1), np.stack(stds, axis=1)


def batch_predict(models: SurrogateBank, designs) -> list:
    """Surrogate :class:`Evaluation` (means and stds, ``R × C``) per design."""
    mean, std = models.predict(designs)
    return [Evaluation(mean[i], Source.SURROGATE, std[i]) for i in range(mean.shape[0])]


def optimistic_responses(evaluation: Evaluation, K: float, spec: ProblemSpec) -> np.ndarray:
    """Apply :func:`lcb` to every response row of a surrogate evaluation."""
    maximize = np.array([r.direction is Direction.MAXIMIZE for r in spec.responses])[:, None]
    std = evaluation.std if evaluation.std is not None else 0.0
    return np.where(maximize, evaluation.responses + K * std, evaluation.responses - K * std)
