"""Quadratic conserved densities, functional gradients, Poisson brackets.

Every density handled here is a quadratic form

    H[f] = 1/2 sum_ij integral f_i O_ij(f_j) dx

whose operator matrix satisfies O_ij^dagger = O_ji, so the functional
gradient is simply (delta H / delta f)_i = sum_j O_ij(f_j).  All the
conserved families in this package (pair densities of the counterpropagating
walk, the canonical and skew telegrapher families, the multi-velocity
quadratics, the internal-state quadratics) fit this shape.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import StructureError, UnsupportedDensityError
from .fields import ComponentBundle, Field, PeriodicGrid, inner
from .operators import Composed, LinearOperator
from .propagators import OperatorMatrix, _coerce_entry


class QuadraticDensity:
    """H[f] = 1/2 sum_ij <f_i, O_ij f_j> with O_ij^dagger = O_ji."""

    def __init__(self, entries: Sequence[Sequence], name: str = "H"):
        rows = [list(r) for r in entries]
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ValueError("density operator matrix must be square")
        self.entries = [[_coerce_entry(e) for e in r] for r in rows]
        self.n_components = n
        self.name = name

    @classmethod
    def diagonal(cls, ops: Sequence, name: str = "H") -> "QuadraticDensity":
        ops = list(ops)
        n = len(ops)
        entries = [[ops[i] if i == j else None for j in range(n)] for i in range(n)]
        return cls(entries, name=name)

    @classmethod
    def mixed_pair(cls, op: LinearOperator, name: str = "H") -> "QuadraticDensity":
        """H = <f_0, M f_1> for selfadjoint M, stored symmetrically."""
        return cls([[None, op], [op, None]], name=name)

    def check_symmetry(self, grid: PeriodicGrid, tol: float = 1e-10) -> None:
        for i in range(self.n_components):
            for j in range(i, self.n_components):
                a = self.entries[i][j]
                b = self.entries[j][i]
                ma = a.matrix(grid) if a is not None else None
                mb = b.matrix(grid) if b is not None else None
                if ma is None and mb is None:
                    continue
                if ma is None or mb is None:
                    raise UnsupportedDensityError(
                        f"density entries ({i},{j})/({j},{i}) are not adjoint partners")
                scale = max(np.linalg.norm(ma), np.linalg.norm(mb))
                if np.linalg.norm(ma.T - mb) > tol * max(scale, 1.0):
                    raise UnsupportedDensityError(
                        f"density entry ({i},{j}) is not the adjoint of ({j},{i})")

    def gradient(self, state: ComponentBundle) -> ComponentBundle:
        if len(state) != self.n_components:
            raise UnsupportedDensityError(
                f"state has {len(state)} components, density expects {self.n_components}")
        outs = []
        for row in self.entries:
            acc = np.zeros(state.grid.shape)
            for op, f in zip(row, state.fields):
                if op is not None:
                    acc = acc + op.apply(f).values
            outs.append(acc)
        return ComponentBundle.from_arrays(state.grid, outs)

    def value(self, state: ComponentBundle) -> float:
        grad = self.gradient(state)
        return 0.5 * sum(inner(f, g) for f, g in zip(state.fields, grad.fields))


def functional_gradient(density: QuadraticDensity, state: ComponentBundle) -> ComponentBundle:
    """delta H / delta f for a registered quadratic density."""
    if not isinstance(density, QuadraticDensity):
        raise UnsupportedDensityError(
            f"unregistered density form of type {type(density).__name__}")
    return density.gradient(state)


def check_skew_structure(matrix: OperatorMatrix, grid: PeriodicGrid,
                         tol: float = 1e-10) -> None:
    """Verify B_ij^dagger = -B_ji entrywise; raise StructureError otherwise."""
    n = matrix.size
    for i in range(n):
        for j in range(i, n):
            a = matrix.entries[i][j]
            b = matrix.entries[j][i]
            ma = a.matrix(grid) if a is not None else None
            mb = b.matrix(grid) if b is not None else None
            if ma is None and mb is None:
                continue
            if ma is None:
                ma = np.zeros_like(mb)
            if mb is None:
                mb = np.zeros_like(ma)
            scale = max(np.linalg.norm(ma), np.linalg.norm(mb), 1.0)
            if np.linalg.norm(ma.T + mb) > tol * scale:
                raise StructureError(
                    f"entry ({i},{j}) is not minus the adjoint of ({j},{i}): "
                    "not a Hamiltonian structure matrix")


def poisson_bracket(h_a: QuadraticDensity, h_b: QuadraticDensity,
                    structure: OperatorMatrix, state: ComponentBundle,
                    check: bool = True) -> float:
    """{H_a, H_b} = integral of grad(H_a) . B grad(H_b) on the given state."""
    if check:
        check_skew_structure(structure, state.grid)
    grad_a = functional_gradient(h_a, state)
    grad_b = functional_gradient(h_b, state)
    b_grad_b = structure.apply(grad_b)
    return sum(inner(f, g) for f, g in zip(grad_a.fields, b_grad_b.fields))


def bracket_scale(h_a: QuadraticDensity, h_b: QuadraticDensity,
                  structure: OperatorMatrix, state: ComponentBundle) -> float:
    """Magnitude reference for bracket tolerances: integral of |integrand|."""
    grad_a = functional_gradient(h_a, state)
    b_grad_b = structure.apply(functional_gradient(h_b, state))
    integrand = sum(f.values * g.values
                    for f, g in zip(grad_a.fields, b_grad_b.fields))
    return float(np.abs(integrand).sum() * state.grid.cell_volume)


def hamiltonian_flow_generator(structure: OperatorMatrix,
                               density: QuadraticDensity) -> OperatorMatrix:
    """Generator of d/dt f = B (delta H / delta f) for quadratic H.

    Composes G = B O where O is the density's operator matrix; valid because
    both factors are constant-coefficient operator matrices.
    """
    n = structure.size
    entries: list[list] = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            acc: list[LinearOperator] = []
            for k in range(n):
                b = structure.entries[i][k]
                o = density.entries[k][j]
                if b is None or o is None:
                    continue
                acc.append(Composed([b, o]))
            if not acc:
                continue
            if len(acc) == 1:
                entries[i][j] = acc[0]
            else:
                entries[i][j] = _OperatorSum(acc)
    return OperatorMatrix(entries)


class _OperatorSum(LinearOperator):
    """Sum of operators (used when composing structure and density matrices)."""

    def __init__(self, parts: Sequence[LinearOperator]):
        self.parts = tuple(parts)

    def check_grid(self, grid) -> None:
        for p in self.parts:
            p.check_grid(grid)

    def symbol(self, grid):
        syms = [p.symbol(grid) for p in self.parts]
        if any(s is None for s in syms):
            return None
        return sum(syms)

    def matrix(self, grid):
        return sum(p.matrix(grid) for p in self.parts)

    def is_multiplier(self) -> bool:
        return all(p.is_multiplier() for p in self.parts)

    def has_varying_coefficients(self) -> bool:
        return any(p.has_varying_coefficients() for p in self.parts)

    def apply(self, f: Field) -> Field:
        acc = np.zeros(f.grid.shape)
        for p in self.parts:
            acc = acc + p.apply(f).values
        return Field(f.grid, acc)
