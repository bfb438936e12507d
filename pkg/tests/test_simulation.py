import numpy as np
import pytest

from ifwer.errors import ConfigError, DomainError
from ifwer.masking import MaskingScheme
from ifwer.simulation import (
    ExperimentConfig,
    GridSpec,
    MethodSpec,
    Summary,
    TreeSpec,
    default_tree_pattern,
    gen_grid,
    gen_tree,
    mirror_conservative_check,
    run_experiment,
    tree_parents,
)

TENT01 = MaskingScheme("tent", p_star=0.1)


class TestGridGenerator:
    def test_setting_disc_has_21_cells(self):
        spec = GridSpec()
        _, _, labels = gen_grid(spec, np.random.default_rng(0))
        assert int(labels.sum()) == 21

    def test_covariates_are_lattice_coordinates(self):
        spec = GridSpec(rows=3, cols=4, disc_radius=0.0)
        _, coords, _ = gen_grid(spec, np.random.default_rng(0))
        assert coords.shape == (12, 2)
        assert coords[0].tolist() == [0.0, 0.0]
        assert coords[-1].tolist() == [2.0, 3.0]

    def test_independent_non_null_mean(self):
        spec = GridSpec(rows=10, cols=10, disc_center=(5.0, 5.0), disc_radius=2.5,
                        mu_alt=3.0)
        rng = np.random.default_rng(1)
        z_sum, count = 0.0, 0
        for _ in range(1000):
            p, _, labels = gen_grid(spec, rng)
            from scipy.special import ndtri

            z = ndtri(1.0 - p[labels])
            z_sum += z.sum()
            count += labels.sum()
        assert z_sum / count == pytest.approx(3.0, abs=0.05)

    def test_positive_rho_pairwise_covariance(self):
        spec = GridSpec(rows=4, cols=4, disc_radius=0.0, rho=0.5)
        rng = np.random.default_rng(2)
        from scipy.special import ndtri

        z0, z1 = [], []
        for _ in range(10_000):
            p, _, _ = gen_grid(spec, rng)
            z = ndtri(1.0 - p)
            z0.append(z[0])
            z1.append(z[5])
        cov = np.cov(z0, z1)[0, 1]
        assert cov == pytest.approx(0.5, abs=0.05)

    def test_negative_rho_pairwise_covariance(self):
        n = 16
        spec = GridSpec(rows=4, cols=4, disc_radius=0.0, rho=-0.05)
        rng = np.random.default_rng(3)
        from scipy.special import ndtri

        zs = []
        for _ in range(20_000):
            p, _, _ = gen_grid(spec, rng)
            zs.append(ndtri(1.0 - p))
        zs = np.asarray(zs)
        cov = np.cov(zs[:, 0], zs[:, 1])[0, 1]
        var = zs[:, 0].var()
        assert cov == pytest.approx(-0.05, abs=0.02)
        assert var == pytest.approx(1.0, abs=0.05)

    def test_all_null_when_means_equal(self):
        spec = GridSpec(rows=10, cols=10, disc_center=(5.0, 5.0), disc_radius=2.5,
                        mu_alt=0.0, mu_null=0.0)
        _, _, labels = gen_grid(spec, np.random.default_rng(0))
        assert not labels.any()

    def test_validation(self):
        with pytest.raises(ConfigError):
            GridSpec(rows=5, cols=5, disc_center=(4.5, 4.5), disc_radius=3.0)
        with pytest.raises(ConfigError):
            GridSpec(rows=4, cols=4, rho=-0.2)


class TestTreeGenerator:
    def test_node_count_801(self):
        spec = TreeSpec()
        assert spec.n == 801
        assert tree_parents(spec).size == 801

    def test_default_pattern_seven_connected_in_one_subtree(self):
        spec = TreeSpec()
        parents = tree_parents(spec)
        pattern = default_tree_pattern(spec)
        assert len(pattern) == 7
        # All nodes reach the same top-level node without leaving the pattern.
        tops = set()
        for node in pattern:
            cur = node
            while parents[cur] > 0:
                cur = parents[cur]
            tops.add(cur)
        assert len(tops) == 1

    def test_generated_labels(self):
        p, cov, labels = gen_tree(TreeSpec(), np.random.default_rng(0))
        assert p.size == 801
        assert cov.shape == (801, 1)
        assert int(labels.sum()) == 7

    def test_single_root_and_acyclic(self):
        parents = tree_parents(TreeSpec())
        assert int((parents == -1).sum()) == 1
        # Walking up from any node terminates (acyclic by construction).
        for node in (0, 1, 100, 800):
            seen = set()
            cur = node
            while cur != -1:
                assert cur not in seen
                seen.add(cur)
                cur = int(parents[cur])

    def test_root_fanout(self):
        parents = tree_parents(TreeSpec())
        assert int((parents == 0).sum()) == 20

    def test_disconnected_pattern_rejected(self):
        spec = TreeSpec(non_null_nodes=(1, 2))  # two separate top-level nodes
        with pytest.raises(ConfigError):
            gen_tree(spec, np.random.default_rng(0))


class TestRunExperiment:
    def test_seed_determinism(self):
        config = ExperimentConfig(
            generator=GridSpec(rows=6, cols=6, disc_center=(3.0, 3.0),
                               disc_radius=1.2, mu_alt=3.0),
            method=MethodSpec(kind="ifwer", scheme=TENT01, strategy="lowest_score"),
            alpha=0.2,
            reps=20,
            seed=11,
        )
        s1 = run_experiment(config)
        s2 = run_experiment(config)
        assert s1.to_csv_row() == s2.to_csv_row()

    def test_parallel_matches_serial(self):
        config = ExperimentConfig(
            generator=GridSpec(rows=6, cols=6, disc_radius=0.0),
            method=MethodSpec(kind="sidak"),
            alpha=0.2,
            reps=30,
            seed=5,
        )
        assert run_experiment(config, n_jobs=1).to_csv_row() == run_experiment(
            config, n_jobs=2
        ).to_csv_row()

    def test_sidak_all_null_calibration(self):
        config = ExperimentConfig(
            generator=GridSpec(rows=10, cols=10, disc_radius=0.0),
            method=MethodSpec(kind="sidak"),
            alpha=0.2,
            reps=2000,
            seed=7,
        )
        summary = run_experiment(config)
        se = np.sqrt(0.2 * 0.8 / config.reps)
        assert 0.16 <= summary.empirical_fwer <= 0.2 + 3 * se
        assert summary.mean_power is None

    def test_single_rep_has_no_standard_errors(self):
        config = ExperimentConfig(
            generator=GridSpec(rows=5, cols=5, disc_radius=0.0),
            method=MethodSpec(kind="holm"),
            reps=1,
            seed=1,
        )
        summary = run_experiment(config)
        assert summary.se_fwer is None and summary.se_power is None
        assert "NA" in summary.to_csv_row()

    def test_equal_means_behave_all_null_for_interactive_method(self):
        config = ExperimentConfig(
            generator=GridSpec(rows=8, cols=8, disc_center=(4.0, 4.0),
                               disc_radius=1.5, mu_alt=0.0, mu_null=0.0),
            method=MethodSpec(kind="ifwer", scheme=TENT01),
            alpha=0.2,
            reps=200,
            seed=3,
        )
        summary = run_experiment(config)
        se = np.sqrt(0.2 * 0.8 / config.reps)
        assert summary.empirical_fwer <= 0.2 + 3 * se
        assert summary.mean_power is None

    def test_csv_header_shape(self):
        assert Summary.CSV_HEADER.split(",") == [
            "config_id", "method", "alpha", "scheme", "reps",
            "fwer", "se_fwer", "power", "se_power",
        ]


class TestMirrorConservativeCheck:
    def test_uniform_samples_unflagged(self):
        rng = np.random.default_rng(0)
        report = mirror_conservative_check(rng.uniform(size=200_000), 0.2, bins=5)
        assert not report.inconclusive
        assert report.flagged == ()

    def test_increasing_density_unflagged(self):
        rng = np.random.default_rng(1)
        report = mirror_conservative_check(rng.beta(2.0, 1.0, size=200_000), 0.2, bins=5)
        assert not report.inconclusive
        assert report.flagged == ()

    def test_decreasing_density_flagged(self):
        rng = np.random.default_rng(2)
        report = mirror_conservative_check(rng.beta(1.0, 3.0, size=200_000), 0.2, bins=5)
        assert not report.inconclusive
        assert len(report.flagged) > 0

    def test_small_sample_inconclusive(self):
        rng = np.random.default_rng(3)
        report = mirror_conservative_check(rng.uniform(size=100), 0.2, bins=5)
        assert report.inconclusive

    def test_validation(self):
        with pytest.raises(DomainError):
            mirror_conservative_check([0.1, 0.2], 0.2, bins=1)
        with pytest.raises(DomainError):
            mirror_conservative_check([], 0.2, bins=3)
