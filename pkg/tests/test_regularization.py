"""Tests for regularized vacuum sums and the homogeneous subtraction."""

from __future__ import annotations

import math

import pytest

from gradedcavity.observables.regularization import (
    Regulator,
    RegulatorError,
    TableMismatchError,
    compensated_sum,
    homogeneous_subtraction,
    regularized_sum,
    tail_bound,
    weyl_density,
)
from gradedcavity.spectrum.homogeneous import homogeneous_limit_eps, homogeneous_spectrum
from gradedcavity.spectrum.solver import enumerate_modes
from gradedcavity.spectrum.table import ModeRecord, SpectrumTable
from gradedcavity.types import (
    CavityGeometry,
    DielectricProfile,
    ModeIndex,
    Observable,
    Polarization,
    RegulatorKind,
)

GEOMETRY = CavityGeometry(1.0, 1.0, 2.0)
PROFILE = DielectricProfile(beta=1.0, alpha=0.8)
EXP = RegulatorKind.EXPONENTIAL


def _table(omegas: list[float], omega_max: float = 20.0) -> SpectrumTable:
    records = [
        ModeRecord(ModeIndex(Polarization.TE, 1, 0, p), omega, math.pi, 0.0)
        for p, omega in enumerate(sorted(omegas), start=1)
    ]
    return SpectrumTable.build(GEOMETRY, PROFILE, omega_max, records)


TABLE = _table([2.1, 3.4, 5.0, 7.7, 9.3, 12.6, 15.0, 19.9])


class TestRegulator:
    def test_psi(self) -> None:
        assert Regulator(EXP, 0.5).psi(2.0) == pytest.approx(math.exp(-1.0))
        assert Regulator(RegulatorKind.GAUSSIAN, 0.5).psi(2.0) == pytest.approx(math.exp(-1.0))
        assert Regulator(RegulatorKind.NONE, 0.5).psi(2.0) == 1.0
        assert Regulator(EXP, 0.0).psi(2.0) == 1.0

    def test_trivial(self) -> None:
        assert Regulator(EXP, 0.0).is_trivial
        assert Regulator(RegulatorKind.NONE, 0.3).is_trivial
        assert not Regulator(RegulatorKind.GAUSSIAN, 0.3).is_trivial

    @pytest.mark.parametrize("kappa", [-0.1, math.inf, math.nan])
    def test_invalid_kappa(self, kappa: float) -> None:
        with pytest.raises(RegulatorError):
            Regulator(EXP, kappa)


class TestCompensatedSum:
    def test_recovers_cancelled_term(self) -> None:
        assert compensated_sum([1e16, 1.0, -1e16]) == 1.0

    def test_empty(self) -> None:
        assert compensated_sum([]) == 0.0


class TestRegularizedSum:
    def test_energy_value(self) -> None:
        regulator = Regulator(EXP, 0.2)
        result = regularized_sum(TABLE, regulator, Observable.ENERGY, tail_rtol=1.0)
        expected = 0.5 * math.fsum(w * math.exp(-0.2 * w) for w in TABLE.omegas)
        assert result.value == pytest.approx(expected, rel=1e-14)
        assert result.mode_count == len(TABLE)
        assert result.table_hash == TABLE.content_hash()

    @pytest.mark.parametrize("kind", [RegulatorKind.EXPONENTIAL, RegulatorKind.GAUSSIAN])
    def test_force_to_energy_ratio(self, kind: RegulatorKind) -> None:
        regulator = Regulator(kind, 0.3)
        energy = regularized_sum(TABLE, regulator, Observable.ENERGY, tail_rtol=1.0)
        force = regularized_sum(TABLE, regulator, Observable.FORCE_DIFFERENCE, tail_rtol=1.0)
        expected = PROFILE.alpha / (2 * GEOMETRY.L_z)
        assert math.isclose(force.value / energy.value, expected, rel_tol=1e-15)

    def test_larger_kappa_gives_smaller_energy(self) -> None:
        values = [
            regularized_sum(TABLE, Regulator(EXP, k), Observable.ENERGY, tail_rtol=1.0).value
            for k in (0.05, 0.1, 0.2, 0.4)
        ]
        assert values == sorted(values, reverse=True)
        assert len(set(values)) == 4

    def test_unregulated_needs_acknowledgment(self) -> None:
        with pytest.raises(RegulatorError, match="allow_truncated"):
            regularized_sum(TABLE, Regulator(EXP, 0.0), Observable.ENERGY)

    def test_unregulated_sum_is_flagged_incomplete(self) -> None:
        result = regularized_sum(
            TABLE, Regulator(RegulatorKind.NONE), Observable.ENERGY, allow_truncated=True,
        )
        assert result.value == pytest.approx(0.5 * math.fsum(TABLE.omegas), rel=1e-15)
        assert math.isinf(result.tail_bound)
        assert not result.complete
        assert result.to_dict()["tail_bound"] is None

    def test_complete_when_tail_is_negligible(self) -> None:
        result = regularized_sum(TABLE, Regulator(EXP, 5.0), Observable.ENERGY, tail_rtol=1e-2)
        assert result.complete
        assert result.tail_bound < 1e-2 * abs(result.value)

    def test_dict_layout(self) -> None:
        data = regularized_sum(
            TABLE, Regulator(EXP, 0.2), Observable.ENERGY, tail_rtol=1.0,
        ).to_dict()
        assert data["observable"] == "energy"
        assert data["regulator"] == "exponential"
        assert data["kappa"] == 0.2
        assert data["convention_constant"] == 1.0


class TestTailBound:
    def test_weyl_density(self) -> None:
        expected = 2.0 * math.exp(1.2) * 9.0 / math.pi**2
        assert weyl_density(3.0, GEOMETRY, PROFILE) == pytest.approx(expected, rel=1e-14)

    def test_decreases_with_cutoff(self) -> None:
        regulator = Regulator(EXP, 0.2)
        low = tail_bound(_table([2.0], 20.0), regulator, Observable.ENERGY)
        high = tail_bound(_table([2.0], 40.0), regulator, Observable.ENERGY)
        assert 0 < high < low

    def test_zero_for_homogeneous_force(self) -> None:
        table = homogeneous_spectrum(GEOMETRY, 1.0, 10.0)
        assert tail_bound(table, Regulator(EXP, 0.2), Observable.FORCE_DIFFERENCE) == 0.0


class TestHomogeneousSubtraction:
    def test_identical_tables_cancel(self) -> None:
        result = homogeneous_subtraction(TABLE, TABLE, Regulator(EXP, 0.2), tail_rtol=1.0)
        assert result.value == 0.0

    def test_difference_of_sums(self) -> None:
        reference = homogeneous_spectrum(GEOMETRY, 2.0, 20.0)
        regulator = Regulator(EXP, 0.2)
        result = homogeneous_subtraction(TABLE, reference, regulator, tail_rtol=1.0)
        graded = regularized_sum(TABLE, regulator, Observable.ENERGY, tail_rtol=1.0)
        uniform = regularized_sum(reference, regulator, Observable.ENERGY, tail_rtol=1.0)
        assert result.value == pytest.approx(graded.value - uniform.value, rel=1e-14)
        assert result.tail_bound == pytest.approx(graded.tail_bound + uniform.tail_bound)

    def test_geometry_mismatch(self) -> None:
        reference = homogeneous_spectrum(CavityGeometry(1.0, 1.0, 1.0), 1.0, 20.0)
        with pytest.raises(TableMismatchError, match="geometry"):
            homogeneous_subtraction(TABLE, reference, Regulator(EXP, 0.2))

    def test_cutoff_mismatch(self) -> None:
        reference = homogeneous_spectrum(GEOMETRY, 1.0, 25.0)
        with pytest.raises(TableMismatchError, match="cutoffs"):
            homogeneous_subtraction(TABLE, reference, Regulator(EXP, 0.2))

    def test_needs_regulator(self) -> None:
        with pytest.raises(RegulatorError):
            homogeneous_subtraction(TABLE, TABLE, Regulator(EXP, 0.0))


class TestCutoffStability:
    def test_subtraction_moves_within_tail_bound(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        # kappa omega_max >= 18 keeps the Weyl tail below 1e-4 of the sums.
        regulator = Regulator(EXP, 1.0)
        eps_r = homogeneous_limit_eps(graded_profile)
        results = []
        for omega_max in (18.0, 22.5):
            graded = enumerate_modes(unit_cube, graded_profile, omega_max)
            reference = homogeneous_spectrum(unit_cube, eps_r, omega_max)
            energy = regularized_sum(graded, regulator, Observable.ENERGY, tail_rtol=1e-3)
            assert energy.complete
            results.append(
                homogeneous_subtraction(graded, reference, regulator, tail_rtol=1e-3)
            )
        low, high = results
        assert low.complete
        assert high.complete
        assert high.tail_bound < low.tail_bound
        assert abs(high.value - low.value) <= low.tail_bound
