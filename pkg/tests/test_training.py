"""Training behavior: update schedules per variant, determinism, checkpoints,
serialization, and grid search against the simulator's ground truth."""

import io

import numpy as np
import pytest

from veto_bandit.domain import ActionKind, MapId
from veto_bandit.features import TeamRecord, build_context
from veto_bandit.ope import make_sniw_checkpoint_fn, sn_iw_value
from veto_bandit.policy import ParamVariant, PolicyParameters
from veto_bandit.rewards import RewardKind
from veto_bandit.simulator import (
    burn_in_stats,
    generate_ecosystem,
    generate_log,
    true_policy_value,
)
from veto_bandit.training import (
    BanditVariant,
    Checkpoint,
    DEFAULT_GRID,
    TrainedPolicy,
    TrainingConfig,
    TrainingError,
    checkpoints_to_csv,
    grid_search,
    sgd_step,
    train,
)

from conftest import random_context


def config_for(variant, lr=0.05, epochs=1, reward=RewardKind.ZERO_ONE, **kw):
    return TrainingConfig(
        learning_rate=lr, epochs=epochs, reward_kind=reward, variant=variant, **kw
    )


@pytest.fixture(scope="module")
def small_log():
    eco = generate_ecosystem(8, seed=31, permaban_fraction=0.0, strength_scale=0.9)
    stats = burn_in_stats(eco, 400, seed=1)
    log = generate_log(eco, 500, seed=2, stats=stats, update_stats=False)
    return eco, stats, log


def test_training_config_validation():
    with pytest.raises(TrainingError):
        config_for(BanditVariant.COMBO, epochs=0)
    with pytest.raises(TrainingError):
        config_for(BanditVariant.COMBO, lr=0.0)
    with pytest.raises(TrainingError):
        config_for(BanditVariant.COMBO, checkpoint_every=0)
    with pytest.raises(TrainingError):
        TrainingConfig(
            learning_rate=0.1, epochs=1, reward_kind=RewardKind.ZERO_ONE,
            variant=BanditVariant.COMBO, checkpoint_unit="rounds",
        )


# --- sgd_step ------------------------------------------------------------------


def test_sgd_step_zero_reward_keeps_theta(rng):
    theta = rng.normal(size=161)
    grad = rng.normal(size=161)
    np.testing.assert_array_equal(sgd_step(theta, grad, 0.0, 0.3), theta)


def test_sgd_step_zero_eta_keeps_theta(rng):
    theta = rng.normal(size=161)
    np.testing.assert_array_equal(sgd_step(theta, rng.normal(size=161), 1.0, 0.0), theta)


def test_sgd_step_composes_with_uniform_gradient(fresh_context):
    from veto_bandit.policy import log_policy_gradient

    params = PolicyParameters.zeros(ParamVariant.COMBO)
    grad = log_policy_gradient(params, fresh_context, MapId.dust2, masked=False)
    theta = sgd_step(params.theta, grad, reward=1.0, eta=0.1)
    blocks = theta.reshape(7, 23)
    np.testing.assert_allclose(blocks[0], 0.1 * (6 / 7) * fresh_context.values, atol=1e-12)


def test_sgd_step_rejects_non_finite(rng):
    grad = rng.normal(size=161)
    grad[3] = np.inf
    with pytest.raises(TrainingError):
        sgd_step(np.zeros(161), grad, 1.0, 0.1)
    with pytest.raises(TrainingError):
        sgd_step(np.zeros(161), np.zeros(160), 1.0, 0.1)


# --- train ----------------------------------------------------------------------


def test_zero_theta_initialization_gives_uniform_first_distribution(small_log):
    _, stats, log = small_log
    policy = train(log.records[:6], config_for(BanditVariant.COMBO))
    fresh = build_context(TeamRecord(), TeamRecord(), list(MapId))
    zero_policy = TrainedPolicy(
        variant=BanditVariant.COMBO,
        pick_params=PolicyParameters.zeros(ParamVariant.COMBO),
        ban_params=None,
        config=policy.config,
    )
    dist = zero_policy.pick_distribution(fresh)
    np.testing.assert_allclose(dist.probs, np.full(7, 1 / 7), atol=1e-15)


def test_empty_dataset_returns_initialization():
    policy = train([], config_for(BanditVariant.COMBO))
    assert not policy.pick_params.theta.any()
    assert policy.update_counts["records_seen"] == 0


def test_update_counts_are_auditable(small_log):
    _, _, log = small_log
    records = log.records[: 6 * 50]
    for epochs in (1, 3):
        policy = train(records, config_for(BanditVariant.SPLIT, epochs=epochs))
        assert policy.update_counts["records_seen"] == len(records) * epochs
        assert policy.update_counts["pick_updates"] == 100 * epochs  # 2 picks per match
        assert policy.update_counts["ban_updates"] == 50 * epochs  # one flush per match


def test_training_is_deterministic(small_log):
    _, _, log = small_log
    records = log.records[: 6 * 80]
    a = train(records, config_for(BanditVariant.SPLIT, epochs=2))
    b = train(records, config_for(BanditVariant.SPLIT, epochs=2))
    np.testing.assert_array_equal(a.pick_params.theta, b.pick_params.theta)
    np.testing.assert_array_equal(a.ban_params.theta, b.ban_params.theta)


def test_split_ban_parameters_independent_of_pick_reward_kind(small_log):
    """Ban rewards ignore the pick reward kind, so the split ban bandit must too."""
    eco, stats, log = small_log
    zero_one = log.records[: 6 * 100]
    mor = generate_log(
        generate_ecosystem(8, seed=31, permaban_fraction=0.0, strength_scale=0.9),
        100,
        seed=2,
        reward_kind=RewardKind.MARGIN_OF_ROUNDS,
        stats=stats,
        update_stats=False,
    ).records
    a = train(zero_one, config_for(BanditVariant.SPLIT, reward=RewardKind.ZERO_ONE))
    b = train(mor, config_for(BanditVariant.SPLIT, reward=RewardKind.MARGIN_OF_ROUNDS))
    np.testing.assert_array_equal(a.ban_params.theta, b.ban_params.theta)
    assert not np.array_equal(a.pick_params.theta, b.pick_params.theta)


def test_combo_pick_updates_move_ban_distribution(small_log):
    """The combined bandit shares parameters: pick training shifts ban probabilities."""
    _, _, log = small_log
    records = [r for r in log.records[: 6 * 120]]
    pick_only = [r for r in records if r.kind is ActionKind.PICK]
    # train on picks alone by zeroing ban rewards (gradients still flow on picks)
    from dataclasses import replace

    neutered = []
    for r in records:
        neutered.append(replace(r, reward=0.0) if r.kind is ActionKind.BAN else r)
    policy = train(neutered, config_for(BanditVariant.COMBO, lr=0.2))
    context = pick_only[0].context
    zero = TrainedPolicy(
        variant=BanditVariant.COMBO,
        pick_params=PolicyParameters.zeros(ParamVariant.COMBO),
        ban_params=None,
        config=policy.config,
    )
    before = zero.ban_distribution(context).probs
    after = policy.ban_distribution(context).probs
    assert not np.allclose(before, after)


def test_episodic_uses_double_width_and_separate_blocks(small_log):
    _, _, log = small_log
    policy = train(log.records[: 6 * 100], config_for(BanditVariant.EPISODIC, lr=0.1))
    theta = policy.pick_params.theta
    assert theta.shape == (322,)
    assert theta[: 7 * 23].any() and theta[7 * 23 :].any()
    context = log.records[0].context
    assert not np.allclose(
        policy.pick_distribution(context).probs, policy.ban_distribution(context).probs
    )


def test_train_rejects_missing_rewards(small_log):
    _, _, log = small_log
    from dataclasses import replace

    records = [replace(log.records[0], reward=None)] + list(log.records[1:6])
    with pytest.raises(TrainingError):
        train(records, config_for(BanditVariant.COMBO))


def test_train_rejects_shuffled_records(small_log):
    _, _, log = small_log
    records = list(log.records[:12])
    records[0], records[7] = records[7], records[0]
    with pytest.raises(TrainingError):
        train(records, config_for(BanditVariant.COMBO))


def test_checkpoints_every_hundred_decisions(small_log):
    _, _, log = small_log
    records = log.records[: 6 * 100]  # 600 decisions
    seen = []

    def fake_eval(policy):
        seen.append(policy.update_counts["records_seen"])
        return 0.5, 0.0

    policy = train(
        records,
        config_for(BanditVariant.COMBO, epochs=2, checkpoint_every=100),
        checkpoint_fn=fake_eval,
    )
    assert [c.decision_index for c in policy.checkpoints] == list(range(100, 1201, 100))
    assert policy.checkpoints[0].pick_value == 0.5


def test_checkpoint_csv_layout(small_log):
    _, _, log = small_log
    policy = train(
        log.records[: 6 * 50],
        config_for(BanditVariant.COMBO, checkpoint_every=100),
        checkpoint_fn=lambda p: (0.25, -0.125),
    )
    buffer = io.StringIO()
    checkpoints_to_csv(policy, buffer)
    lines = buffer.getvalue().splitlines()
    assert lines[0] == "decision_index,pick_value,ban_value"
    assert lines[1] == "100,0.25,-0.125"


def test_model_serialization_round_trip(tmp_path, small_log):
    _, _, log = small_log
    for variant in BanditVariant:
        policy = train(log.records[: 6 * 60], config_for(variant, epochs=2))
        path = tmp_path / f"{variant.value}.json"
        policy.save(path)
        loaded = TrainedPolicy.load(path)
        assert loaded.variant == policy.variant
        assert loaded.config == policy.config
        np.testing.assert_array_equal(loaded.pick_params.theta, policy.pick_params.theta)
        if variant is BanditVariant.SPLIT:
            np.testing.assert_array_equal(loaded.ban_params.theta, policy.ban_params.theta)
        context = log.records[0].context
        np.testing.assert_array_equal(
            loaded.ban_distribution(context).probs, policy.ban_distribution(context).probs
        )


def test_probability_matrix_agrees_with_scalar_path(small_log):
    _, _, log = small_log
    records = list(log.records[:120])
    for variant in BanditVariant:
        policy = train(log.records[: 6 * 60], config_for(variant, lr=0.1))
        for kind in (ActionKind.PICK, ActionKind.BAN):
            subset = [r for r in records if r.kind is kind]
            contexts = np.stack([r.context.values for r in subset])
            masks = contexts[:, :7] > 0
            matrix = policy.probability_matrix(contexts, masks, kind)
            for row, record in zip(matrix, subset):
                np.testing.assert_allclose(row, policy.distribution(record), atol=1e-12)


# --- grid search -----------------------------------------------------------------


def test_grid_search_single_point(small_log):
    _, _, log = small_log
    records = list(log.records[: 6 * 200])
    base = config_for(BanditVariant.COMBO)
    best, policy = grid_search(records, 0.25, {"learning_rate": [0.05]}, base)
    assert best.learning_rate == 0.05
    assert policy.variant is BanditVariant.COMBO


def test_grid_search_empty_grid_rejected(small_log):
    _, _, log = small_log
    with pytest.raises(TrainingError):
        grid_search(list(log.records[:600]), 0.25, {}, config_for(BanditVariant.COMBO))


def test_grid_search_needs_enough_validation_decisions(small_log):
    _, _, log = small_log
    with pytest.raises(TrainingError):
        grid_search(
            list(log.records[: 6 * 10]), 0.2, {"learning_rate": [0.1]},
            config_for(BanditVariant.COMBO),
        )


def test_grid_search_tie_break_prefers_smaller_lr_then_fewer_epochs(small_log):
    """All-zero rewards make every grid point identical, forcing the tie-break."""
    from dataclasses import replace

    _, _, log = small_log
    records = [replace(r, reward=0.0) for r in log.records[: 6 * 150]]
    base = config_for(BanditVariant.COMBO)
    best, _ = grid_search(
        records, 0.3, {"learning_rate": [0.5, 0.01, 0.1], "epochs": [3, 1, 2]}, base
    )
    assert best.learning_rate == 0.01
    assert best.epochs == 1


def test_grid_search_selection_is_near_optimal_by_oracle():
    """The SN-IW-selected grid point's true value is within 0.02 of the best."""
    eco = generate_ecosystem(8, seed=41, permaban_fraction=0.0, strength_scale=1.1)
    stats = burn_in_stats(eco, 500, seed=1)
    log = generate_log(eco, 700, seed=2, stats=stats, update_stats=False)
    records = list(log.records)
    grid = {"learning_rate": [0.01, 0.1, 0.5], "epochs": [1, 3]}
    base = config_for(BanditVariant.COMBO)
    best_config, _ = grid_search(records, 0.2, grid, base)

    truths = {}
    for lr in grid["learning_rate"]:
        for epochs in grid["epochs"]:
            candidate = config_for(BanditVariant.COMBO, lr=lr, epochs=epochs)
            policy = train(records, candidate)
            truth = true_policy_value(
                eco, policy, ActionKind.PICK, RewardKind.ZERO_ONE, 4000, seed=9, stats=stats
            )
            truths[(lr, epochs)] = truth.value
    chosen = truths[(best_config.learning_rate, best_config.epochs)]
    assert chosen >= max(truths.values()) - 0.02
