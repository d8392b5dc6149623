"""Effective viscosity and effective pressure tensors from a corrector set."""

import json

import numpy as np

from .corrector import geometry_hash


def _strain_arrays(psi, E):
    """D(psi) + E at native staggered locations: centers, centers, corners."""
    grid = psi.grid
    h = grid.h
    E = 0.5 * (np.asarray(E, dtype=float) + np.asarray(E, dtype=float).T)
    sxx = (np.roll(psi.ux, -1, 0) - psi.ux) / h + E[0, 0]
    syy = (np.roll(psi.uy, -1, 1) - psi.uy) / h + E[1, 1]
    sxy = 0.5 * (
        (psi.ux - np.roll(psi.ux, 1, 1)) / h + (psi.uy - np.roll(psi.uy, 1, 0)) / h
    ) + E[0, 1]
    return sxx, syy, sxy


def effective_viscosity(correctors):
    """Gram matrix B[k,l] = avg (D(psi_k)+E_k) : (D(psi_l)+E_l) over the cell.

    Symmetric positive semidefinite by construction; returned in the
    trace-free symmetric basis.
    """
    basis = correctors.basis
    if len(basis) != 2 or len(correctors.psi) != len(basis):
        raise ValueError("corrector set is missing basis directions")
    strains = [_strain_arrays(p, E) for p, E in zip(correctors.psi, basis)]
    ncell = correctors.grid.n ** 2
    B = np.empty((2, 2))
    for k in range(2):
        for l in range(k, 2):
            ak, bk, ck = strains[k]
            al, bl, cl = strains[l]
            B[k, l] = B[l, k] = (
                np.sum(ak * al) + np.sum(bk * bl) + 2.0 * np.sum(ck * cl)
            ) / ncell
    return B


def effective_b(correctors):
    """Effective pressure matrix from the recorded mean fluxes.

    <J_E> = 2 B E + (b:E) Id with B E trace-free, so b:E = tr<J_E> / 2;
    expanding over the orthonormal basis gives b itself.
    """
    basis = correctors.basis
    if len(correctors.mean_flux) != len(basis):
        raise ValueError("corrector set has no recorded mean fluxes")
    b = np.zeros((2, 2))
    coeffs = []
    for E, mean in zip(basis, correctors.mean_flux):
        c = float(np.trace(mean)) / 2.0
        coeffs.append(c)
        b = b + c * E
    return b, coeffs


class EffectiveTensors:
    """Assembled effective tensors plus cross-check residuals."""

    def __init__(self, correctors):
        self.B_bar = effective_viscosity(correctors)
        self.b_bar, b_coeffs = effective_b(correctors)
        self.lam = correctors.lam
        self.basis = correctors.basis
        self.cross_check = []
        self.warnings = []
        for k, (E, mean) in enumerate(zip(correctors.basis, correctors.mean_flux)):
            BE = sum(self.B_bar[l, k] * correctors.basis[l] for l in range(2))
            model = 2.0 * BE + b_coeffs[k] * np.eye(2)
            r = float(np.linalg.norm(mean - model))
            self.cross_check.append(r)
            scale = max(float(np.linalg.norm(mean)), 1e-300)
            if r > 1e-3 * scale:
                self.warnings.append(
                    f"mean-flux identity residual {r:.3e} exceeds 1e-3 of "
                    f"|<J_E>| for basis direction {k}"
                )
        self.provenance = {
            "grid_n": correctors.grid.n,
            "box_size": correctors.grid.box_size,
            "geometry_hash": geometry_hash(correctors.geometry),
            "mu_stiff": correctors.config.mu_stiff,
            "rel_tolerance": correctors.config.rel_tolerance,
        }

    def b_bar_cartesian(self):
        return self.b_bar

    def to_dict(self):
        return {
            "lambda": self.lam,
            "B_bar": self.B_bar.tolist(),
            "b_bar": self.b_bar.tolist(),
            "cross_check_residuals": self.cross_check,
            "warnings": self.warnings,
            "provenance": self.provenance,
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1, sort_keys=True)

    @staticmethod
    def load_dict(path):
        with open(path) as fh:
            return json.load(fh)
