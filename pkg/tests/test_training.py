"""Tests for losses, metrics, the training loop, and evaluation reports."""

import os
import re

import numpy as np
import pytest
import torch
from scipy.ndimage import binary_erosion

from stressfield.dataset import (
    BC_CASES,
    DESK_EDGE_LENGTH,
    DatasetBundle,
    NormalizationSpec,
    SplitSpec,
    fit_normalization,
    make_split,
    simulate_sample,
)
from stressfield.errors import ConfigurationError, ContractError, TrainingError
from stressfield.fem import STEEL, von_mises
from stressfield.grid import build_grid_operator, pde_residual
from stressfield.models import ModelConfig, build_model, load_checkpoint
from stressfield.training import (
    EvalReport,
    LossWeights,
    PdeCache,
    TrainConfig,
    body_force_density,
    evaluate,
    loss_bc,
    loss_data,
    loss_pde,
    mrpe,
    parse_report,
    total_loss,
    train,
)

TINY = ModelConfig(variant="Spatiotempo-LSTM", d=8)


@pytest.fixture(scope="module")
def sample0():
    """One simulated sample reused by the residual tests."""
    return simulate_sample(1, 0, 1, rng_seed=42, target_edge_length=DESK_EDGE_LENGTH)


@pytest.fixture(scope="module")
def mini_bundle():
    """Eight simulated samples with a fitted normalization and cyclic split."""
    combos = [
        (1, 0, 1), (1, 0, 2), (1, 3, 1), (1, 3, 2),
        (2, 0, 1), (2, 0, 2), (2, 3, 1), (2, 3, 2),
    ]
    samples = [
        simulate_sample(g, b, l, rng_seed=42, target_edge_length=DESK_EDGE_LENGTH)
        for g, b, l in combos
    ]
    split = make_split("baseline")
    train_idx = [i for i in range(len(samples)) if i % 5 < 3]
    norm = fit_normalization(samples[i].stress for i in train_idx)
    return DatasetBundle(samples=samples, manifest={}, normalization=norm, split=split)


class TestHandValues:
    def test_mae_two_by_two(self):
        pred = np.array([[1.0, 2.0], [3.0, 0.0]])
        truth = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert abs(loss_data(pred, truth) - 1.0) < 1e-12

    def test_mae_constant_offset(self):
        assert abs(loss_data(np.full((4, 6), 0.5), np.zeros((4, 6))) - 0.5) < 1e-12

    def test_mae_identical_fields(self):
        x = np.random.default_rng(0).normal(size=(5, 7))
        assert loss_data(x, x) == 0.0

    def test_total_loss_weighted_sum(self):
        value = total_loss((0.2, 0.1, 0.05), LossWeights(1.0, 0.5, 2.0))
        assert abs(value - 0.35) < 1e-12

    def test_total_loss_data_only_weights(self):
        assert total_loss((0.37, 5.0, 9.0), LossWeights(1.0, 0.0, 0.0)) == 0.37

    def test_total_loss_monotone_in_each_part(self):
        w = LossWeights(1.0, 0.3, 0.7)
        base = total_loss((0.2, 0.1, 0.05), w)
        for bump in ((0.1, 0, 0), (0, 0.1, 0), (0, 0, 0.1)):
            bumped = tuple(p + d for p, d in zip((0.2, 0.1, 0.05), bump))
            assert total_loss(bumped, w) >= base

    def test_mrpe_ten_percent_case(self):
        assert abs(mrpe(np.array([9.0, 9.0]), np.array([10.0, 10.0])) - 10.0) < 1e-12

    def test_mrpe_zero_error(self):
        x = np.array([1.0, -2.0, 3.0])
        assert mrpe(x, x) == 0.0

    def test_mrpe_denominator_is_global_peak_of_both(self):
        # peak lives in the prediction here, not the truth
        value = mrpe(np.array([20.0, 0.0]), np.array([10.0, 10.0]))
        assert abs(value - 100.0 * 10.0 / 20.0) < 1e-12

    def test_mrpe_all_zero_rejected(self):
        with pytest.raises(ConfigurationError):
            mrpe(np.zeros(3), np.zeros(3))

    def test_mrpe_scale_invariance(self):
        rng = np.random.default_rng(7)
        pred = rng.normal(size=(6, 4))
        truth = rng.normal(size=(6, 4))
        base = mrpe(pred, truth)
        for c in rng.uniform(1e-6, 1e6, size=100):
            assert abs(mrpe(c * pred, c * truth) - base) <= 1e-12 * base

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ContractError):
            loss_data(np.zeros((2, 3)), np.zeros((3, 2)))
        with pytest.raises(ContractError):
            mrpe(np.zeros(2), np.zeros(3))


class TestLossWeights:
    def test_defaults_valid(self):
        w = LossWeights()
        assert w.w_data == 1.0

    @pytest.mark.parametrize("bad", [(-1, 0, 1), (0, 0, 0), (float("nan"), 1, 1), (1, float("inf"), 0)])
    def test_invalid_rejected(self, bad):
        with pytest.raises(ConfigurationError):
            LossWeights(*bad)


class TestBoundaryLoss:
    def test_initial_frame_offset_measured_exactly(self):
        pred = np.zeros((3, 2, 3))
        pred[:, 0, :] = 0.25
        value = loss_bc(pred, np.zeros_like(pred), np.zeros(3, bool))
        assert abs(value - 0.25) < 1e-12

    def test_constrained_node_mismatch_added(self):
        pred = np.zeros((3, 2, 3))
        pred[:, 0, :] = 0.25
        truth = pred.copy()
        truth[0] += 1.0
        value = loss_bc(pred, truth, np.array([True, False, False]))
        assert abs(value - 1.25) < 1e-12

    def test_zero_prediction_on_zero_truth_is_free(self):
        z = np.zeros((4, 5, 3))
        assert loss_bc(z, z, np.ones(4, bool)) == 0.0

    def test_unconstrained_mismatch_is_free(self):
        rng = np.random.default_rng(3)
        truth = rng.normal(size=(4, 5, 3))
        pred = truth.copy()
        pred[2:] += 10.0                  # mismatch only on unconstrained nodes
        pred[:, 0, :] = 0.0               # clean initial frame
        truth[:2] = pred[:2]              # agreement on the constrained pair
        assert loss_bc(pred, truth, np.array([True, True, False, False])) == 0.0

    def test_mask_shape_rejected(self):
        with pytest.raises(ContractError):
            loss_bc(np.zeros((3, 2, 3)), np.zeros((3, 2, 3)), np.zeros(4, bool))


class TestPdeLoss:
    def test_zero_everything_gives_zero(self, sample0):
        import dataclasses

        quiet = dataclasses.replace(
            sample0,
            input=dataclasses.replace(sample0.input, data=np.zeros_like(sample0.input.data)),
            acceleration=np.zeros_like(sample0.acceleration),
        )
        op = build_grid_operator(quiet.mesh.nodes, grid_size=48)
        norm = NormalizationSpec(mins=-np.ones(3), maxs=np.ones(3))
        pred = np.zeros((len(quiet.mesh.nodes), 10, 3))
        assert loss_pde(pred, quiet, op, norm) == 0.0

    def test_matches_reference_route_per_frame(self, sample0):
        """The matrix-form loss equals composing lift + gradient + forcing."""
        op = build_grid_operator(sample0.mesh.nodes, grid_size=64)
        norm = NormalizationSpec(
            mins=-np.array([4e7, 1.6e7, 1.2e7]), maxs=np.array([4e7, 1.6e7, 1.2e7])
        )
        truth = sample0.stress
        pred_norm = truth.transpose(0, 2, 1) / norm.scales[None, None, :]
        fast = loss_pde(pred_norm, sample0, op, norm)

        rho = STEEL.density
        b = body_force_density(sample0)
        a = sample0.acceleration
        acc = 0.0
        for t in range(truth.shape[2]):
            r = pde_residual(
                truth[:, 0, t], truth[:, 1, t], truth[:, 2, t], b[:, :, t], a[:, :, t], rho, op
            )
            acc += 0.5 * (np.abs(r.r_x[op.mask]).mean() + np.abs(r.r_y[op.mask]).mean())
        ref = acc / truth.shape[2] / (rho * 9.81)
        assert abs(fast - ref) <= 1e-10 * ref

    def test_truth_residual_magnitude_pinned(self, sample0):
        """Regression pin: simulated-truth residual level at a fixed grid."""
        op = build_grid_operator(sample0.mesh.nodes, grid_size=64)
        scales = np.array([3.8734776e7, 1.5037893e7, 1.1375326e7])
        norm = NormalizationSpec(mins=-scales, maxs=scales)
        pred_norm = sample0.stress.transpose(0, 2, 1) / scales[None, None, :]
        value = loss_pde(pred_norm, sample0, op, norm)
        assert abs(value - 78.5967) / 78.5967 < 5e-3

    def test_zero_prediction_residual_exceeds_truth_baseline(self, sample0):
        """Known limitation, kept as an executable record: the residual of the
        reconstructed ground-truth field should undercut the zero prediction
        (whose residual is purely the lifted forcing), but the reconstruction
        noise floor scales with the stress gradients and exceeds the forcing
        magnitude for these quasi-static load histories, at every bandwidth
        and grid size tried. A faithful implementation fails this ordering.
        """
        op = build_grid_operator(sample0.mesh.nodes, grid_size=64)
        scales = np.array([3.8734776e7, 1.5037893e7, 1.1375326e7])
        norm = NormalizationSpec(mins=-scales, maxs=scales)
        truth_norm = sample0.stress.transpose(0, 2, 1) / scales[None, None, :]
        truth_value = loss_pde(truth_norm, sample0, op, norm)
        zero_value = loss_pde(np.zeros_like(truth_norm), sample0, op, norm)
        assert zero_value > truth_value

    def test_prediction_shape_rejected(self, sample0):
        op = build_grid_operator(sample0.mesh.nodes, grid_size=32)
        norm = NormalizationSpec(mins=-np.ones(3), maxs=np.ones(3))
        with pytest.raises(ContractError):
            loss_pde(np.zeros((len(sample0.mesh.nodes), 10, 2)), sample0, op, norm)

    def test_cache_agrees_with_direct_evaluation(self, mini_bundle):
        cache = PdeCache(mini_bundle, [0, 1], grid_size=48)
        sample = mini_bundle.samples[0]
        op = build_grid_operator(sample.mesh.nodes, grid_size=48)
        norm = mini_bundle.normalization
        pred_norm = sample.stress.transpose(0, 2, 1) / norm.scales[None, None, :]
        direct = loss_pde(pred_norm, sample, op, norm)
        cached = float(cache.loss(0, torch.as_tensor(sample.stress.transpose(0, 2, 1))))
        assert abs(cached - direct) / direct < 1e-3

    def test_cache_shares_operator_across_same_geometry(self, mini_bundle):
        cache = PdeCache(mini_bundle, [0, 1, 4], grid_size=32)
        assert cache.geometry_of[0] == cache.geometry_of[1]
        assert len(cache.ops) == 2


class TestResidualScale:
    """Magnitude of the simulated-truth residual against the forcing scale."""

    CASES = [(1, 0, 1, 1.2243), (10, 0, 12, 1.6711), (620, 4, 9, 0.9620)]

    @staticmethod
    def _ratio(gid, bc, load):
        s = simulate_sample(gid, bc, load, rng_seed=42, target_edge_length=DESK_EDGE_LENGTH)
        op = build_grid_operator(s.mesh.nodes, grid_size=64)
        interior = binary_erosion(op.mask)
        rho = STEEL.density
        b = body_force_density(s)
        a = s.acceleration
        num = 0.0
        for t in range(s.stress.shape[2]):
            r = pde_residual(
                s.stress[:, 0, t], s.stress[:, 1, t], s.stress[:, 2, t],
                b[:, :, t], a[:, :, t], rho, op,
            )
            num += 0.5 * (np.abs(r.r_x[interior]).mean() + np.abs(r.r_y[interior]).mean())
        num /= s.stress.shape[2]
        return num / np.abs(b - rho * a).mean()

    @pytest.mark.parametrize("gid,bc,load,expected", CASES)
    def test_truth_residual_regression_bound(self, gid, bc, load, expected):
        """The reconstruction error level is frozen; gross regressions fail."""
        ratio = self._ratio(gid, bc, load)
        assert abs(ratio - expected) / expected < 0.02

    @pytest.mark.parametrize("gid,bc,load,_", CASES)
    def test_truth_residual_within_stated_forcing_fraction(self, gid, bc, load, _):
        """Known limitation, kept as an executable record: the grid
        reconstruction of simulated stress fields carries an error floor
        proportional to the stress gradients themselves, which for these
        quasi-static load histories exceeds ten percent of the mean forcing
        magnitude at every bandwidth and grid size tried. The bound below is
        therefore not met by a faithful implementation.
        """
        assert self._ratio(gid, bc, load) <= 0.10


class TestGradient:
    def test_total_loss_directional_derivatives(self, mini_bundle):
        model = build_model(TINY, seed=3).double()
        sample = mini_bundle.samples[0]
        norm = mini_bundle.normalization
        op = build_grid_operator(sample.mesh.nodes, grid_size=32)
        inputs = torch.as_tensor(sample.input.data.transpose(0, 2, 1))[None]
        truth = torch.as_tensor(
            sample.stress.transpose(0, 2, 1) / norm.scales[None, None, :]
        )
        bc_mask = torch.as_tensor(
            (sample.mesh.edge_labels & int(BC_CASES[sample.bc_case][0])) != 0
        )
        weights = LossWeights(1.0, 1e-4, 0.05)

        def objective():
            pred = model(inputs)[0]
            parts = (
                loss_data(pred, truth),
                loss_pde(pred, sample, op, norm),
                loss_bc(pred, truth, bc_mask),
            )
            return total_loss(parts, weights)

        loss = objective()
        loss.backward()
        grad = torch.cat([p.grad.flatten() for p in model.parameters()])
        params = [p.detach().clone() for p in model.parameters()]

        gen = torch.Generator().manual_seed(11)
        eps = 1e-6
        for _ in range(3):
            direction = torch.randn(grad.shape, generator=gen, dtype=torch.float64)
            direction /= direction.norm()
            offset = 0
            for p, base in zip(model.parameters(), params):
                n = base.numel()
                with torch.no_grad():
                    p.copy_(base + eps * direction[offset : offset + n].view(base.shape))
                offset += n
            with torch.no_grad():
                plus = float(objective())
            offset = 0
            for p, base in zip(model.parameters(), params):
                n = base.numel()
                with torch.no_grad():
                    p.copy_(base - eps * direction[offset : offset + n].view(base.shape))
                offset += n
            with torch.no_grad():
                minus = float(objective())
            fd = (plus - minus) / (2 * eps)
            analytic = float(grad @ direction)
            assert abs(fd - analytic) <= 1e-4 * max(1.0, abs(analytic))
            offset = 0
            for p, base in zip(model.parameters(), params):
                with torch.no_grad():
                    p.copy_(base)


class TestTrainingLoop:
    def test_two_epochs_decrease_loss(self, mini_bundle, tmp_path):
        model = build_model(TINY, seed=0)
        result = train(
            model, mini_bundle, None,
            TrainConfig(epochs=2, seed=0, out_dir=str(tmp_path)),
        )
        totals = [float(total_loss(h["train"], result.weights)) for h in result.history]
        assert len(totals) == 2
        assert totals[1] < totals[0]
        assert os.path.exists(result.best_path)
        assert os.path.exists(result.last_path)
        assert os.path.exists(result.resume_path)

    def test_log_line_format(self, mini_bundle, tmp_path):
        model = build_model(TINY, seed=0)
        result = train(
            model, mini_bundle, None,
            TrainConfig(epochs=1, seed=0, out_dir=str(tmp_path)),
        )
        lines = open(result.log_path).read().splitlines()
        assert len(lines) == 2
        pattern = re.compile(
            r"^\d+,(train|val),"
            r"\d\.\d{8}e[+-]\d{2},\d\.\d{8}e[+-]\d{2},\d\.\d{8}e[+-]\d{2},\d\.\d{8}e[+-]\d{2}$"
        )
        for line in lines:
            assert pattern.match(line), line
        assert lines[0].split(",")[1] == "train"
        assert lines[1].split(",")[1] == "val"

    def test_auto_calibration_sets_ten_percent_shares(self, mini_bundle, tmp_path):
        model = build_model(TINY, seed=1)
        result = train(
            model, mini_bundle, None,
            TrainConfig(epochs=0, seed=1, out_dir=str(tmp_path)),
        )
        w = result.weights
        assert w.w_data == 1.0 and w.w_pde > 0 and w.w_bc > 0

        # recompute the initial per-term means with an identical fresh model
        probe = build_model(TINY, seed=1)
        cache = PdeCache(mini_bundle, mini_bundle.indices_for("train"), grid_size=64)
        scales = torch.from_numpy(mini_bundle.normalization.scales).float()
        sums = np.zeros(3)
        train_idx = mini_bundle.indices_for("train")
        with torch.no_grad():
            for i in train_idx:
                s = mini_bundle.samples[i]
                inputs = torch.as_tensor(s.input.data.transpose(0, 2, 1)).float()[None]
                pred = probe(inputs)[0]
                truth = torch.as_tensor(
                    s.stress.transpose(0, 2, 1) / mini_bundle.normalization.scales[None, None, :]
                ).float()
                mask = torch.as_tensor(
                    (s.mesh.edge_labels & int(BC_CASES[s.bc_case][0])) != 0
                )
                sums[0] += float(loss_data(pred, truth))
                sums[1] += float(cache.loss(i, pred * scales))
                sums[2] += float(loss_bc(pred, truth, mask))
        d0, p0, b0 = sums / len(train_idx)
        assert abs(w.w_pde * p0 - 0.1 * d0) / (0.1 * d0) < 1e-5
        assert abs(w.w_bc * b0 - 0.1 * d0) / (0.1 * d0) < 1e-5

    def test_explicit_weights_respected_and_pde_skipped(self, mini_bundle, tmp_path):
        model = build_model(TINY, seed=0)
        result = train(
            model, mini_bundle, None,
            TrainConfig(epochs=1, seed=0, out_dir=str(tmp_path)),
            weights=LossWeights(1.0, 0.0, 0.0),
        )
        assert result.weights == LossWeights(1.0, 0.0, 0.0)
        assert all(float(h["train"][1]) == 0.0 for h in result.history)

    def test_resume_matches_uninterrupted_run(self, mini_bundle, tmp_path):
        cfg = lambda d: TrainConfig(epochs=4, seed=0, out_dir=str(tmp_path / d))
        straight = build_model(TINY, seed=0)
        r_straight = train(straight, mini_bundle, None, cfg("a"))

        part1 = build_model(TINY, seed=0)
        train(part1, mini_bundle, None, cfg("b"), stop_after=2)
        resumed = build_model(TINY, seed=0)
        r_resumed = train(
            resumed, mini_bundle, None, cfg("b"),
            resume_from=str(tmp_path / "b" / "resume.pt"),
        )

        va = torch.cat([p.detach().flatten() for p in straight.parameters()])
        vb = torch.cat([p.detach().flatten() for p in resumed.parameters()])
        assert float((va - vb).abs().max()) <= 1e-6
        assert r_resumed.weights == r_straight.weights
        assert len(r_resumed.history) == len(r_straight.history) == 4
        for ha, hb in zip(r_straight.history, r_resumed.history):
            for part in ("train", "val"):
                for xa, xb in zip(ha[part], hb[part]):
                    assert abs(float(xa) - float(xb)) <= 1e-6

    def test_grad_accumulation_requires_positive(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(grad_accumulation=0)

    def test_adam_beta1_requires_unit_interval(self):
        with pytest.raises(ConfigurationError):
            TrainConfig(adam_beta1=1.0)
        with pytest.raises(ConfigurationError):
            TrainConfig(adam_beta1=-0.1)

    def test_grad_accumulation_matches_equivalent_batch(self, mini_bundle, tmp_path):
        micro = build_model(TINY, seed=0)
        train(
            micro, mini_bundle, None,
            TrainConfig(epochs=2, batch_size=2, grad_accumulation=2, seed=0,
                        out_dir=str(tmp_path / "micro")),
            weights=LossWeights(1.0, 0.0, 0.0),
        )
        whole = build_model(TINY, seed=0)
        train(
            whole, mini_bundle, None,
            TrainConfig(epochs=2, batch_size=4, seed=0, out_dir=str(tmp_path / "whole")),
            weights=LossWeights(1.0, 0.0, 0.0),
        )
        va = torch.cat([p.detach().flatten() for p in micro.parameters()])
        vb = torch.cat([p.detach().flatten() for p in whole.parameters()])
        assert float((va - vb).abs().max()) <= 1e-6

    def test_nonfinite_loss_aborts_with_diagnostic(self, mini_bundle, tmp_path):
        model = build_model(ModelConfig(variant="Spatio-MLP", mlp_width=7, max_nodes=256), seed=0)
        with pytest.raises(TrainingError):
            train(
                model, mini_bundle, None,
                TrainConfig(epochs=3, seed=0, learning_rate=1e30, out_dir=str(tmp_path)),
                weights=LossWeights(1.0, 0.0, 0.0),
            )
        assert os.path.exists(tmp_path / "diagnostic.pt")

    def test_zero_epochs_writes_initialized_checkpoint(self, mini_bundle, tmp_path):
        model = build_model(TINY, seed=5)
        result = train(
            model, mini_bundle, None,
            TrainConfig(epochs=0, seed=5, out_dir=str(tmp_path)),
            weights=LossWeights(1.0, 0.0, 0.0),
        )
        assert result.history == []
        loaded, _, _ = load_checkpoint(result.last_path)
        va = torch.cat([p.detach().flatten() for p in model.parameters()])
        vb = torch.cat([p.detach().flatten() for p in loaded.parameters()])
        assert torch.equal(va, vb)

    def test_empty_training_split_rejected(self, mini_bundle, tmp_path):
        model = build_model(TINY, seed=0)
        empty = SplitSpec(
            preset="geometry",
            geometry_ids={"train": set(), "val": {1, 2}, "test": set()},
        )
        with pytest.raises(ConfigurationError):
            train(model, mini_bundle, empty, TrainConfig(epochs=1, out_dir=str(tmp_path)))

    def test_padded_batch_matches_single_forward(self, mini_bundle):
        from stressfield.training import _batch_forward, _prepare_sample

        model = build_model(TINY, seed=2)
        model.eval()
        prepared = {
            i: _prepare_sample(mini_bundle.samples[i], mini_bundle.normalization)
            for i in (0, 4)
        }
        assert prepared[0].n_nodes != prepared[4].n_nodes
        with torch.no_grad():
            batched = _batch_forward(model, prepared, [0, 4])
            solo0 = model(prepared[0].inputs[None])[0]
            solo4 = model(prepared[4].inputs[None])[0]
        assert float((batched[0, : prepared[0].n_nodes] - solo0).abs().max()) < 1e-6
        assert float((batched[1, : prepared[4].n_nodes] - solo4).abs().max()) < 1e-6


class TestEvaluate:
    def test_oracle_is_perfect(self, mini_bundle):
        report = evaluate("oracle", mini_bundle, "val")
        for ch in ("sxx", "syy", "sxy", "svm"):
            assert report.mrpe[ch] == 0.0
            assert report.mae[ch] == 0.0

    def test_zero_predictor_matches_direct_formula(self, mini_bundle):
        report = evaluate("zero", mini_bundle, "val")
        idx = mini_bundle.indices_for("val")
        assert report.n_samples == len(idx)
        truth = np.concatenate(
            [mini_bundle.samples[i].stress[:, 0, :].ravel() for i in idx]
        )
        expected = 100.0 * np.abs(truth).mean() / np.abs(truth).max()
        assert abs(report.mrpe["sxx"] - expected) < 1e-9

    def test_von_mises_channel_from_components(self, mini_bundle):
        report = evaluate("zero", mini_bundle, "test")
        idx = mini_bundle.indices_for("test")
        svm = np.concatenate(
            [
                von_mises(
                    mini_bundle.samples[i].stress[:, 0, :],
                    mini_bundle.samples[i].stress[:, 1, :],
                    mini_bundle.samples[i].stress[:, 2, :],
                ).ravel()
                for i in idx
            ]
        )
        assert abs(report.mae["svm"] - np.abs(svm).mean()) / np.abs(svm).mean() < 1e-9

    def test_model_predictor_runs(self, mini_bundle):
        model = build_model(TINY, seed=0)
        report = evaluate(model, mini_bundle, "val")
        assert report.seconds_per_sample > 0
        assert all(v > 0 for v in report.mrpe.values())

    def test_unknown_baseline_rejected(self, mini_bundle):
        with pytest.raises(ConfigurationError):
            evaluate("median", mini_bundle, "val")

    def test_empty_part_rejected(self, mini_bundle):
        with pytest.raises(ConfigurationError):
            evaluate("zero", mini_bundle, "nope")

    def test_report_text_roundtrip(self, mini_bundle, tmp_path):
        report = evaluate("zero", mini_bundle, "val")
        path = tmp_path / "report.txt"
        report.write(str(path))
        parsed = parse_report(open(path).read())
        assert parsed == report

    def test_report_rejects_negative_metrics(self):
        with pytest.raises(ConfigurationError):
            EvalReport(
                part="val", n_samples=1,
                mae={"sxx": -1.0, "syy": 0, "sxy": 0, "svm": 0},
                mrpe={"sxx": 0, "syy": 0, "sxy": 0, "svm": 0},
                seconds_per_sample=0.1,
            )
