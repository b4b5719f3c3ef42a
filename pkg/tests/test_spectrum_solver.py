"""Tests for the graded-cavity spectrum solver."""

from __future__ import annotations

import itertools
import math
from unittest.mock import patch

import oracle
import pytest

from gradedcavity.fields.mode_fields import phi_profile
from gradedcavity.metrics import MetricsRegistry
from gradedcavity.special.bessel import (
    ScaledPair,
    bessel_j,
    bessel_j_prime,
    bessel_y,
    bessel_y_prime,
    cross_product,
    cross_product_tilde,
)
from gradedcavity.spectrum.homogeneous import homogeneous_frequency, homogeneous_limit_eps
from gradedcavity.spectrum.solver import (
    RootScanError,
    SolverSettings,
    ZetaDegeneracyError,
    end_wall_etas,
    enumerate_modes,
    eta,
    find_roots,
    matching_coefficient,
    mode_parameters,
    normalized_spectrum_fn,
    scan_start,
    spectrum_fn,
    wkb_phase,
    zeta_coefficient,
)
from gradedcavity.spectrum.table import SpectrumTable
from gradedcavity.types import (
    CavityGeometry,
    DielectricProfile,
    ModeIndex,
    ModeIndexError,
    Polarization,
    ZetaBranch,
)

TE = Polarization.TE
TM = Polarization.TM


class TestEta:
    def test_value_at_origin(self, unit_cube: CavityGeometry) -> None:
        profile = DielectricProfile(beta=4.0, alpha=0.5)
        # 2 L_z omega sqrt(beta) / (alpha c0) = 2 * 3 * 2 / 0.5
        assert eta(profile, unit_cube, 3.0, 0.0) == pytest.approx(24.0, rel=1e-15)

    def test_end_wall_ratio(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        eta0, eta_l = end_wall_etas(graded_profile, unit_cube, 2.0)
        assert eta_l / eta0 == pytest.approx(math.exp(0.5), rel=1e-15)
        assert eta(graded_profile, unit_cube, 2.0, 1.0) == pytest.approx(eta_l, rel=1e-15)

    def test_outside_box_rejected(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        with pytest.raises(ValueError, match="outside"):
            eta(graded_profile, unit_cube, 1.0, 1.5)

    def test_homogeneous_profile_rejected(self, unit_cube: CavityGeometry) -> None:
        with pytest.raises(ValueError, match="alpha > 0"):
            eta(DielectricProfile(beta=1.0, alpha=0.0), unit_cube, 1.0, 0.0)

    def test_non_positive_omega_rejected(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        with pytest.raises(ValueError):
            eta(graded_profile, unit_cube, 0.0, 0.0)


class TestModeParameters:
    def test_te_order(self, unit_cube: CavityGeometry, graded_profile: DielectricProfile) -> None:
        k_x, k_y, nu = mode_parameters(unit_cube, graded_profile, TE, 1, 0)
        assert (k_x, k_y) == (math.pi, 0.0)
        assert nu == pytest.approx(2 * math.pi, rel=1e-15)

    def test_tm_order(self, unit_cube: CavityGeometry, graded_profile: DielectricProfile) -> None:
        _, _, nu = mode_parameters(unit_cube, graded_profile, TM, 1, 1)
        assert nu == pytest.approx(math.sqrt((2 * math.sqrt(2) * math.pi) ** 2 + 1), rel=1e-15)

    @pytest.mark.parametrize(("pol", "n_x", "n_y"), [(TE, 0, 0), (TM, 1, 0), (TM, 0, 2)])
    def test_empty_transverse_pairs_rejected(
        self,
        unit_cube: CavityGeometry,
        graded_profile: DielectricProfile,
        pol: Polarization,
        n_x: int,
        n_y: int,
    ) -> None:
        with pytest.raises(ModeIndexError):
            mode_parameters(unit_cube, graded_profile, pol, n_x, n_y)

    def test_scan_start_is_lowest_cutoff(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        assert scan_start(unit_cube, graded_profile, math.pi) == pytest.approx(
            math.pi * math.exp(-0.5), rel=1e-15,
        )


class TestFindRoots:
    def test_roots_are_zeros(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        _, _, nu = mode_parameters(unit_cube, graded_profile, TE, 1, 0)
        roots = find_roots(TE, unit_cube, graded_profile, 1, 0, 12.0)
        assert len(roots) >= 3
        assert roots == sorted(roots)
        for omega in roots:
            value = normalized_spectrum_fn(TE, nu, graded_profile, unit_cube, omega)
            assert abs(value) < 1e-10

    def test_tm_roots_are_zeros(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        _, _, nu = mode_parameters(unit_cube, graded_profile, TM, 1, 1)
        roots = find_roots(TM, unit_cube, graded_profile, 1, 1, 12.0)
        assert roots
        for omega in roots:
            value = normalized_spectrum_fn(TM, nu, graded_profile, unit_cube, omega)
            assert abs(value) < 1e-10

    def test_no_roots_below_cutoff(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        assert find_roots(TE, unit_cube, graded_profile, 3, 3, 1.0) == []

    def test_finer_scan_gives_same_roots(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        coarse = find_roots(TE, unit_cube, graded_profile, 1, 1, 15.0)
        fine = find_roots(TE, unit_cube, graded_profile, 1, 1, 15.0, scan_fraction=1 / 32)
        assert len(coarse) == len(fine)
        for a, b in zip(coarse, fine, strict=True):
            assert a == pytest.approx(b, rel=1e-12)

    def test_te_root_matches_oracle(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        omega = find_roots(TE, unit_cube, graded_profile, 1, 0, 6.0)[0]
        expected = oracle.cross_root(2 * math.pi, math.exp(0.5), omega * (1 + 1e-6))
        assert omega == pytest.approx(expected, rel=1e-12)

    def test_tm_root_matches_oracle(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        omega = find_roots(TM, unit_cube, graded_profile, 1, 1, 6.0)[0]
        nu = math.sqrt((2 * math.sqrt(2) * math.pi) ** 2 + 1)
        expected = oracle.cross_root(nu, math.exp(0.5), omega * (1 + 1e-6), tilde=True)
        assert omega == pytest.approx(expected, rel=1e-12)

    def test_unstable_count_raises(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        # A bracket per grid node: the count changes with every halving.
        def one_per_node(g: object, nodes: list[float]) -> list[tuple[float, float]]:
            return [(w, w) for w in nodes]

        with (
            patch("gradedcavity.spectrum.solver._brackets", side_effect=one_per_node),
            pytest.raises(RootScanError) as exc_info,
        ):
            find_roots(TE, unit_cube, graded_profile, 1, 0, 10.0, max_halvings=2)
        assert exc_info.value.pol is TE
        assert (exc_info.value.n_x, exc_info.value.n_y) == (1, 0)

    def test_zero_halvings_rejected(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        with pytest.raises(ValueError, match="max_halvings"):
            find_roots(TE, unit_cube, graded_profile, 1, 0, 10.0, max_halvings=0)

    def test_counts_roots_in_metrics(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        metrics = MetricsRegistry()
        roots = find_roots(TE, unit_cube, graded_profile, 1, 0, 12.0, metrics=metrics)
        assert metrics.counter("roots_found") == len(roots)


class TestMatchingCoefficient:
    def test_profile_vanishes_at_origin(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        _, _, nu = mode_parameters(unit_cube, graded_profile, TE, 1, 0)
        omega = find_roots(TE, unit_cube, graded_profile, 1, 0, 6.0)[0]
        zeta, branch = matching_coefficient(TE, nu, graded_profile, unit_cube, omega)
        assert branch is ZetaBranch.STANDARD
        eta0, eta_l = end_wall_etas(graded_profile, unit_cube, omega)
        scale = math.hypot(bessel_j(nu, eta0), bessel_y(nu, eta0))
        assert abs(bessel_j(nu, eta0) + zeta * bessel_y(nu, eta0)) < 1e-14 * scale
        # ... and at the far wall because omega is a root.
        scale_l = math.hypot(bessel_j(nu, eta_l), zeta * bessel_y(nu, eta_l))
        assert abs(bessel_j(nu, eta_l) + zeta * bessel_y(nu, eta_l)) < 1e-9 * scale_l


class TestSpectrumFunction:
    @pytest.mark.parametrize("omega", [3.0, 5.5, 9.25])
    def test_te_is_plain_cross_product(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile, omega: float,
    ) -> None:
        _, _, nu = mode_parameters(unit_cube, graded_profile, TE, 1, 0)
        eta0, eta_l = end_wall_etas(graded_profile, unit_cube, omega)
        assert spectrum_fn(TE, nu, graded_profile, unit_cube, omega) == cross_product(
            nu, eta0, eta_l,
        )

    @pytest.mark.parametrize("omega", [4.0, 6.5, 9.25])
    def test_tm_is_tilde_cross_product(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile, omega: float,
    ) -> None:
        _, _, nu = mode_parameters(unit_cube, graded_profile, TM, 1, 1)
        eta0, eta_l = end_wall_etas(graded_profile, unit_cube, omega)
        assert spectrum_fn(TM, nu, graded_profile, unit_cube, omega) == cross_product_tilde(
            nu, eta0, eta_l,
        )

    @pytest.mark.parametrize(("pol", "n_x", "n_y"), [(TE, 1, 0), (TM, 1, 1)])
    def test_normalized_keeps_sign(
        self,
        unit_cube: CavityGeometry,
        graded_profile: DielectricProfile,
        pol: Polarization,
        n_x: int,
        n_y: int,
    ) -> None:
        _, _, nu = mode_parameters(unit_cube, graded_profile, pol, n_x, n_y)
        for omega in (3.7, 5.1, 7.9, 11.3):
            raw = spectrum_fn(pol, nu, graded_profile, unit_cube, omega)
            scaled = normalized_spectrum_fn(pol, nu, graded_profile, unit_cube, omega)
            assert math.copysign(1.0, raw) == math.copysign(1.0, scaled)
            assert abs(scaled) <= 1.0


class TestZetaCoefficient:
    def test_te_cancels_first_kind(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        _, _, nu = mode_parameters(unit_cube, graded_profile, TE, 1, 0)
        omega = 4.2
        eta0 = eta(graded_profile, unit_cube, omega, 0.0)
        zeta = zeta_coefficient(TE, nu, graded_profile, unit_cube, omega)
        assert zeta == pytest.approx(-bessel_j(nu, eta0) / bessel_y(nu, eta0), rel=1e-12)

    def test_tm_cancels_tilde_pair(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        _, _, nu = mode_parameters(unit_cube, graded_profile, TM, 1, 1)
        omega = 5.3
        eta0 = eta(graded_profile, unit_cube, omega, 0.0)
        j_tilde = eta0 * bessel_j_prime(nu, eta0) + bessel_j(nu, eta0)
        y_tilde = eta0 * bessel_y_prime(nu, eta0) + bessel_y(nu, eta0)
        zeta = zeta_coefficient(TM, nu, graded_profile, unit_cube, omega)
        assert zeta == pytest.approx(-j_tilde / y_tilde, rel=1e-10)

    def test_vanishing_denominator_raises(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        pair = ScaledPair(1.0, 0.0, 0.0, -math.inf)
        with (
            patch("gradedcavity.spectrum.solver.log_scaled", return_value=pair),
            pytest.raises(ZetaDegeneracyError),
        ):
            zeta_coefficient(TE, 2.0, graded_profile, unit_cube, 3.0)

    def test_degenerate_zeta_uses_swapped_branch(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        # |Y / M| = 1e-9 sits below the degeneracy threshold.
        pair = ScaledPair(-1.0, 0.0, 1.0, math.log(1e-9))
        with patch("gradedcavity.spectrum.solver.log_scaled", return_value=pair):
            zeta, branch = matching_coefficient(TE, 2.0, graded_profile, unit_cube, 3.0)
        assert branch is ZetaBranch.SWAPPED
        assert zeta == pytest.approx(1e-9, rel=1e-12)


class TestSwappedBranch:
    @pytest.mark.parametrize(("pol", "n_x", "n_y"), [(TE, 1, 0), (TM, 1, 1)])
    def test_same_profile_up_to_scale(
        self,
        unit_cube: CavityGeometry,
        graded_profile: DielectricProfile,
        pol: Polarization,
        n_x: int,
        n_y: int,
    ) -> None:
        # zeta J + Y with zeta' = 1 / zeta is (J + zeta Y) / zeta.
        _, _, nu = mode_parameters(unit_cube, graded_profile, pol, n_x, n_y)
        omega = find_roots(pol, unit_cube, graded_profile, n_x, n_y, 8.0)[0]
        zeta, branch = matching_coefficient(pol, nu, graded_profile, unit_cube, omega)
        assert branch is ZetaBranch.STANDARD
        eta0, eta_l = end_wall_etas(graded_profile, unit_cube, omega)
        for fraction in (0.1, 0.35, 0.6, 0.85):
            value = eta0 + fraction * (eta_l - eta0)
            phi, dphi = phi_profile(pol, nu, zeta, value, ZetaBranch.STANDARD)
            phi_sw, dphi_sw = phi_profile(pol, nu, 1 / zeta, value, ZetaBranch.SWAPPED)
            assert phi_sw * zeta == pytest.approx(phi, rel=1e-10, abs=1e-14)
            assert dphi_sw * zeta == pytest.approx(dphi, rel=1e-10, abs=1e-14)


class TestRootSpacing:
    def test_roots_follow_wkb_phase(self, unit_cube: CavityGeometry) -> None:
        # nu = 4 pi and eta(0) > nu at every root: no turning point, Theta(omega_p) ~ p.
        profile = DielectricProfile(beta=1.0, alpha=0.5)
        _, _, nu = mode_parameters(unit_cube, profile, TE, 1, 0)
        roots = find_roots(TE, unit_cube, profile, 1, 0, 20.0)
        assert len(roots) >= 5
        assert all(a < b for a, b in itertools.pairwise(roots))
        phases = [wkb_phase(nu, *end_wall_etas(profile, unit_cube, w)) for w in roots]
        for p, phase in enumerate(phases, start=1):
            assert phase == pytest.approx(p, abs=0.05)
        for a, b in itertools.pairwise(phases):
            assert b - a == pytest.approx(1.0, abs=0.05)

    def test_tm_roots_are_one_half_wave_apart(self, unit_cube: CavityGeometry) -> None:
        profile = DielectricProfile(beta=1.0, alpha=0.5)
        _, _, nu = mode_parameters(unit_cube, profile, TM, 1, 1)
        nu_perp = mode_parameters(unit_cube, profile, TE, 1, 1)[2]
        roots = find_roots(TM, unit_cube, profile, 1, 1, 25.0)
        assert all(a < b for a, b in itertools.pairwise(roots))
        # Well above the turning point only.
        above = [w for w in roots if eta(profile, unit_cube, w, 0.0) > 1.2 * nu]
        assert len(above) >= 4
        phases = [wkb_phase(nu_perp, *end_wall_etas(profile, unit_cube, w)) for w in above]
        for a, b in itertools.pairwise(phases):
            assert b - a == pytest.approx(1.0, abs=0.1)


class TestSteepProfile:
    def test_scan_through_exact_bessel_zero(self, unit_cube: CavityGeometry) -> None:
        # TE(3,9) at alpha = 4 evaluates J at an exact double zero during the scan.
        profile = DielectricProfile(beta=1.0, alpha=4.0)
        _, _, nu = mode_parameters(unit_cube, profile, TE, 3, 9)
        roots = find_roots(TE, unit_cube, profile, 3, 9, 15.0)
        assert roots
        assert all(a < b for a, b in itertools.pairwise(roots))
        for omega in roots:
            zeta, _ = matching_coefficient(TE, nu, profile, unit_cube, omega)
            assert math.isfinite(zeta)
            value = normalized_spectrum_fn(TE, nu, profile, unit_cube, omega)
            assert abs(value) < 1e-9


class TestEnumerateModes:
    def test_table_is_sorted_and_below_cutoff(self, graded_table: SpectrumTable) -> None:
        omegas = graded_table.omegas
        assert omegas == sorted(omegas)
        assert all(0 < w <= 7.0 for w in omegas)
        assert graded_table.provenance["solver"] == "bessel-cross-product"

    def test_te_degeneracy_of_square_box(self, graded_table: SpectrumTable) -> None:
        a = graded_table.lookup(ModeIndex(TE, 1, 0, 1))
        b = graded_table.lookup(ModeIndex(TE, 0, 1, 1))
        assert a.omega == pytest.approx(b.omega, rel=1e-13)

    def test_first_order_shift(self, graded_table: SpectrumTable) -> None:
        # The lowest modes sit close to the uniform box with eps_r = exp(alpha / 2).
        record = graded_table.lookup(ModeIndex(TE, 1, 0, 1))
        reference = homogeneous_frequency(
            graded_table.geometry, math.exp(0.5), 1.0, 1, 0, 1,
        )
        assert record.omega == pytest.approx(reference, rel=0.05)

    def test_threads_do_not_change_table(
        self, unit_cube: CavityGeometry, graded_profile: DielectricProfile,
    ) -> None:
        serial = enumerate_modes(unit_cube, graded_profile, 6.0)
        threaded = enumerate_modes(
            unit_cube, graded_profile, 6.0, settings=SolverSettings(threads=4),
        )
        assert serial.content_hash() == threaded.content_hash()

    def test_small_alpha_uses_closed_form(self, unit_cube: CavityGeometry) -> None:
        profile = DielectricProfile(beta=2.0, alpha=1e-5)
        table = enumerate_modes(unit_cube, profile, 6.0)
        assert table.provenance["solver"] == "homogeneous-closed-form"
        assert table.provenance["eps_r"] == homogeneous_limit_eps(profile)
        assert table.records
        assert not any(r.has_profile for r in table.records)

    def test_homogeneous_limit(self) -> None:
        geometry = CavityGeometry(1.0, 1.0, 1.0)
        profile = DielectricProfile(beta=2.0, alpha=1e-3)
        table = enumerate_modes(geometry, profile, 8.5)
        te = [r for r in table.records if r.pol is TE]
        tm = [r for r in table.records if r.pol is TM]
        assert len(te) >= 20
        assert len(tm) >= 20

        eps_r = homogeneous_limit_eps(profile)
        for record in table.records:
            index = record.index
            m = index.p if index.pol is TE else index.p - 1
            shifted = homogeneous_frequency(geometry, eps_r, 1.0, index.n_x, index.n_y, m)
            plain = homogeneous_frequency(geometry, profile.beta, 1.0, index.n_x, index.n_y, m)
            assert record.omega == pytest.approx(shifted, rel=1e-4), index.label()
            assert record.omega == pytest.approx(plain, rel=5e-4), index.label()
