"""Command-line front end for collection, learning, planning and evaluation."""

import argparse
import logging
import sys
from dataclasses import asdict, replace
from pathlib import Path

import numpy as np
import pandas as pd

from tpsr.config import (
    COLLECT_STREAM,
    DIR_OUT,
    EVAL_STREAM,
    FEATURES_STREAM,
    PLAN_STREAM,
    PRESETS,
    ExperimentConfig,
)
from tpsr.envs.arena import ACTION_LABELS, goal_predicate
from tpsr.envs.astar import LatticePlanner
from tpsr.envs.environment import (
    ArenaEnvironment,
    Environment,
    PomdpEnvironment,
    collect_trajectories,
)
from tpsr.envs.pomdp import read_pomdp
from tpsr.envs.trajectories import (
    Trajectory,
    attach_events,
    events_frame,
    read_trajectories,
    write_trajectories,
)
from tpsr.errors import (
    FeatureMapMismatch,
    NumericalError,
    Unreachable,
    ValidationError,
)
from tpsr.features.kernels import FeatureMap
from tpsr.learning.pipeline import (
    BATCH_SIZE,
    embed_histories,
    fit_feature_map,
    indicator_feature_map,
    learn_model,
    samples_from_windows,
)
from tpsr.learning.windows import window_arrays
from tpsr.model.io import load_model, save_model
from tpsr.model.predict import probability_table, trajectory_likelihoods
from tpsr.model.tpsr import TpsrModel
from tpsr.planning.executor import PolicyExecutor, run_random_episode
from tpsr.planning.perseus import lower_bound_value, perseus
from tpsr.planning.reward import RewardModel, learn_reward, reward_residuals
from tpsr.planning.value import load_value_function, save_value_function

#: Exit codes by error family.
EXIT_VALIDATION, EXIT_NUMERICAL = 2, 3


def build_environment(cfg: ExperimentConfig) -> Environment:
    """The environment named by the configuration."""

    if cfg.env.kind == "pomdp":
        return PomdpEnvironment(read_pomdp(cfg.env.pomdp_path))

    return ArenaEnvironment(cfg.arena, cfg.reward)


def action_labels(cfg: ExperimentConfig, num_actions: int) -> tuple[str, ...]:
    if cfg.env.kind == "arena" and num_actions == len(ACTION_LABELS):
        return ACTION_LABELS

    return tuple(f"a{i}" for i in range(num_actions))


def load_trajectories(path: Path) -> tuple[list[Trajectory], int]:
    """Read a trajectory file and the events file next to it, if any."""

    trajectories, num_actions = read_trajectories(path)
    events = path.parent / "events.csv"
    if events.exists():
        trajectories = attach_events(trajectories, pd.read_csv(events))

    logging.info(f"Loaded {len(trajectories)} trajectories from {path}")

    return trajectories, num_actions


def embed_windows(
    model: TpsrModel,
    feature_map: FeatureMap,
    trajectories: list[Trajectory],
    cfg: ExperimentConfig,
) -> dict[str, np.ndarray]:
    """
    Normalized pivot states of every training window.

    Returns
    -------
    dict
        Arrays `states`, `valid`, `actions`, `observations` and `origin`
        with one row per window.
    """

    actions, observations, origin = window_arrays(
        trajectories,
        feature_map.past_len,
        feature_map.future_len,
        cfg.learn.stride,
        cfg.learn.burn_in,
    )

    states, valid = [], []
    for start in range(0, len(actions), BATCH_SIZE):
        chunk = slice(start, start + BATCH_SIZE)
        batch = samples_from_windows(actions[chunk], observations[chunk], feature_map)
        chunk_states, chunk_valid = embed_histories(model, batch)
        states.append(chunk_states)
        valid.append(chunk_valid)

    return {
        "states": np.concatenate(states),
        "valid": np.concatenate(valid),
        "actions": actions,
        "observations": observations,
        "origin": origin,
    }


def cmd_collect(cfg: ExperimentConfig, out: Path) -> Path:
    """Record random-action trajectories and their events."""

    env = build_environment(cfg)
    trajectories = collect_trajectories(
        env,
        cfg.collect.num_trajectories,
        cfg.collect.trajectory_len,
        cfg.stream_seed(COLLECT_STREAM),
    )

    out.mkdir(parents=True, exist_ok=True)
    path = out / "trajectories.txt"
    write_trajectories(trajectories, path, env.num_actions)
    events = events_frame(trajectories)
    events.to_csv(out / "events.csv", index=False)

    logging.info(
        f"Wrote {len(trajectories)} trajectories of {cfg.collect.trajectory_len} pairs to {path} "
        f"({int(events['collision'].sum())} collisions, total reward {events['reward'].sum():g})"
    )

    return path


def cmd_learn(cfg: ExperimentConfig, trajectories_path: Path, out: Path) -> Path:
    """Fit the feature map, learn a model and export its spectrum and embedding."""

    trajectories, num_actions = load_trajectories(trajectories_path)
    features = cfg.features

    if features.kind == "indicator":
        if cfg.env.kind == "pomdp":
            num_obs = read_pomdp(cfg.env.pomdp_path).num_obs
        else:
            num_obs = int(max(t.observations.max() for t in trajectories)) + 1
        feature_map = indicator_feature_map(
            num_obs, num_actions, features.past_len, features.future_len
        )
        estimation = trajectories
    else:
        if len(trajectories) < 2:
            raise ValidationError("Kernel features need at least two trajectories")
        split = cfg.collect.split(len(trajectories))
        feature_map = fit_feature_map(
            trajectories[:split],
            features.past_len,
            features.future_len,
            features.kernel_counts,
            cfg.stream_seed(FEATURES_STREAM),
            bandwidth=features.bandwidth or None,
            components=features.pca_components or None,
            stride=cfg.learn.stride,
            burn_in=cfg.learn.burn_in,
        )
        estimation = trajectories[split:]

    result = learn_model(
        estimation, feature_map, cfg.learn, num_actions, action_labels(cfg, num_actions)
    )

    out.mkdir(parents=True, exist_ok=True)
    path = out / "model.tpsr"
    provenance = {"config": cfg.to_mapping(), "estimation_trajectories": len(estimation)}
    save_model(result.model, path, feature_map, provenance)

    pd.DataFrame(
        {"index": np.arange(len(result.spectrum)), "singular_value": result.spectrum}
    ).to_csv(out / "spectrum.csv", index=False)

    embedded = embed_windows(result.model, feature_map, estimation, cfg)
    embedding_frame(embedded, feature_map.past_len).to_csv(out / "embedding.csv", index=False)

    return path


def embedding_frame(embedded: dict[str, np.ndarray], past_len: int) -> pd.DataFrame:
    """State coordinates of each history, tagged with its pivot observation."""

    states = embedded["states"]
    frame = pd.DataFrame(
        {
            "trajectory": embedded["origin"][:, 0],
            "offset": embedded["origin"][:, 1],
            "valid": embedded["valid"],
        }
    )
    for i in range(states.shape[1]):
        frame[f"state_{i}"] = states[:, i]

    pivot = embedded["observations"][:, past_len]
    if pivot.shape[1] % 3 == 0 and pivot.shape[1] > 1:
        colors = pivot.reshape(len(pivot), -1, 3).mean(axis=1)
        frame["mean_r"], frame["mean_g"], frame["mean_b"] = colors.T
    else:
        frame["observation"] = pivot[:, 0]

    return frame


def cmd_plan(
    cfg: ExperimentConfig, model_path: Path, trajectories_path: Path, out: Path
) -> Path:
    """Learn the reward, embed belief points and run Perseus."""

    model, feature_map, _ = load_model(model_path)
    if feature_map is None:
        raise FeatureMapMismatch(f"{model_path} does not carry its feature map")

    trajectories, _ = load_trajectories(trajectories_path)
    if any(t.rewards is None for t in trajectories):
        raise ValidationError(f"No rewards found in events.csv next to {trajectories_path}")

    embedded = embed_windows(model, feature_map, trajectories, cfg)
    past = feature_map.past_len
    valid = embedded["valid"]
    states = embedded["states"][valid]
    actions = embedded["actions"][valid, past]
    rewards = np.array(
        [trajectories[t].rewards[offset + past] for t, offset in embedded["origin"][valid]]
    )

    reward = learn_reward(states, actions, rewards, model.num_actions)
    out.mkdir(parents=True, exist_ok=True)
    reward_residuals(reward, states, actions, rewards).to_csv(out / "reward.csv", index=False)

    seed = cfg.stream_seed(PLAN_STREAM)
    rng = np.random.default_rng(seed)
    count = min(cfg.plan.belief_points, len(states))
    points = states[np.sort(rng.choice(len(states), size=count, replace=False))]
    logging.info(f"Planning over {count} belief points")

    planner = cfg.plan.planner_config(points, seed)
    initial = lower_bound_value(model, reward, planner.gamma, points)
    result = perseus(model, reward, planner, feature_map.observation_support(), initial)

    path = out / "value.tpvf"
    save_value_function(result.value_function, path, model.feature_map_ref, result.stages)

    return path


def load_reward(path: Path) -> RewardModel:
    """Rebuild the reward model from the `eta_*` columns of `reward.csv`."""

    frame = pd.read_csv(path).sort_values("action")
    columns = sorted(
        (c for c in frame.columns if c.startswith("eta_")), key=lambda c: int(c.split("_")[1])
    )
    if not columns:
        raise ValidationError(f"{path} holds no reward coefficients")

    return RewardModel(frame[columns].to_numpy(dtype=np.float64))


def cmd_eval(
    cfg: ExperimentConfig,
    model_path: Path,
    value_path: Path,
    out: Path,
    reward_path: Path | None = None,
) -> pd.DataFrame:
    """
    Run greedy and random episodes and summarize them.

    Episode `i` of both policies draws from `default_rng((seed, i))`, so
    they start from the same pose. For the arena the summary also
    carries the mean A* step count from the pose where the greedy policy
    takes over after its warm-up.
    """

    model, feature_map, _ = load_model(model_path)
    vf, sidecar = load_value_function(value_path)
    if feature_map is None or sidecar.get("feature_map_ref") != model.feature_map_ref:
        raise FeatureMapMismatch(f"{value_path} was not planned with the model {model_path}")

    reward = load_reward(reward_path or value_path.parent / "reward.csv")
    env = build_environment(cfg)
    gamma, evaluation = cfg.plan.gamma, cfg.evaluation
    executor = PolicyExecutor(
        model, feature_map, vf, reward, gamma, evaluation.anti_stall, cfg.plan.renormalize
    )
    lattice = None
    if isinstance(env, ArenaEnvironment):
        lattice = LatticePlanner(cfg.arena, goal_predicate(cfg.arena))

    seed = cfg.stream_seed(EVAL_STREAM)
    metrics, baseline = [], []
    for episode in range(evaluation.episodes):
        starts = []
        result = executor.run_episode(
            env,
            evaluation.max_steps,
            np.random.default_rng((seed, episode)),
            episode,
            on_start=lambda e: starts.append(getattr(e, "pose", None)),
        )
        row = asdict(result)
        row["optimal_steps"] = np.nan
        if lattice is not None:
            try:
                row["optimal_steps"] = lattice.optimal_steps(starts[0])
            except Unreachable as e:
                logging.warning(f"Episode {episode}: {e}")
        metrics.append(row)

        random_result = run_random_episode(
            env, evaluation.max_steps, np.random.default_rng((seed, episode)), gamma, episode
        )
        baseline.append(asdict(random_result))
        logging.info(
            f"Episode {episode}: {'success' if result.success else 'failure'} "
            f"after {result.steps} steps (random: {random_result.steps})"
        )

    out.mkdir(parents=True, exist_ok=True)
    metrics_frame = pd.DataFrame(metrics)
    random_frame = pd.DataFrame(baseline)
    metrics_frame.to_csv(out / "metrics.csv", index=False)
    random_frame.to_csv(out / "random.csv", index=False)

    summary = pd.DataFrame(
        [
            _summarize("tpsr", metrics_frame),
            _summarize("random", random_frame),
            {
                "policy": "astar",
                "episodes": int(metrics_frame["optimal_steps"].notna().sum()),
                "successes": int(metrics_frame["optimal_steps"].notna().sum()),
                "mean_steps_success": metrics_frame["optimal_steps"].mean(),
            },
        ]
    )
    summary.to_csv(out / "summary.csv", index=False)
    logging.info(
        f"Successes: {summary.loc[0, 'successes']}/{evaluation.episodes} "
        f"(random {summary.loc[1, 'successes']})"
    )

    return summary


def _summarize(policy: str, frame: pd.DataFrame) -> dict:
    successes = frame[frame["success"]]

    return {
        "policy": policy,
        "episodes": len(frame),
        "successes": len(successes),
        "mean_steps_success": successes["steps"].mean() if len(successes) else np.nan,
    }


def cmd_predict(
    model_path: Path,
    out: Path,
    trajectories_path: Path | None = None,
    length: int | None = None,
) -> pd.DataFrame:
    """Score trajectories, or list the probabilities of every sequence of a length."""

    model, feature_map, _ = load_model(model_path)
    if length is not None:
        table = probability_table(model, length)
        out.mkdir(parents=True, exist_ok=True)
        table.to_csv(out / "probabilities.csv", index=False)
        table.to_csv(sys.stdout, index=False)
        return table

    if trajectories_path is None:
        raise ValidationError("predict needs --trajectories or --length")
    if feature_map is None:
        raise FeatureMapMismatch(f"{model_path} does not carry its feature map")

    trajectories, _ = read_trajectories(trajectories_path)
    predictions = trajectory_likelihoods(model, feature_map, trajectories)
    out.mkdir(parents=True, exist_ok=True)
    predictions.to_csv(out / "predictions.csv", index=False)

    return predictions


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="dotenv configuration file")
    common.add_argument("--seed", type=int, help="root seed, overriding SEED")
    common.add_argument("--scale", choices=sorted(PRESETS), default="paper")
    common.add_argument("--out", type=Path, default=DIR_OUT, help="output directory")
    common.add_argument("--verbose", action="store_true", help="log debug messages")

    parser = argparse.ArgumentParser(prog="tpsr", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("collect", parents=[common], help="record random trajectories")

    learn = commands.add_parser("learn", parents=[common], help="learn a model")
    learn.add_argument("--trajectories", type=Path)

    plan = commands.add_parser("plan", parents=[common], help="plan with a learned model")
    plan.add_argument("--model", type=Path)
    plan.add_argument("--trajectories", type=Path)

    evaluate = commands.add_parser("eval", parents=[common], help="evaluate a plan")
    evaluate.add_argument("--model", type=Path)
    evaluate.add_argument("--value", type=Path)
    evaluate.add_argument("--reward", type=Path)
    evaluate.add_argument("--anti-stall", action="store_true")

    predict = commands.add_parser("predict", parents=[common], help="query a model")
    predict.add_argument("--model", type=Path)
    predict.add_argument("--trajectories", type=Path)
    predict.add_argument("--length", type=int)

    return parser


def run(args: argparse.Namespace) -> None:
    """Dispatch one parsed command."""

    cfg = ExperimentConfig.load(args.config, args.scale).with_seed(args.seed)
    out = args.out

    if args.command == "collect":
        cmd_collect(cfg, out)
    elif args.command == "learn":
        cmd_learn(cfg, args.trajectories or out / "trajectories.txt", out)
    elif args.command == "plan":
        cmd_plan(
            cfg,
            args.model or out / "model.tpsr",
            args.trajectories or out / "trajectories.txt",
            out,
        )
    elif args.command == "eval":
        if args.anti_stall:
            cfg = replace(cfg, evaluation=replace(cfg.evaluation, anti_stall=True))
        cmd_eval(
            cfg,
            args.model or out / "model.tpsr",
            args.value or out / "value.tpvf",
            out,
            args.reward,
        )
    elif args.command == "predict":
        cmd_predict(args.model or out / "model.tpsr", out, args.trajectories, args.length)


def main(argv: list[str] | None = None) -> int:
    """Run the command line and return its exit code."""

    args = build_parser().parse_args(argv)
    logging.basicConfig(
        encoding="utf-8",
        level=logging.DEBUG if args.verbose else logging.INFO,
        stream=sys.stderr,
        format="%(asctime)s %(levelname)s %(message)s",
    )

    try:
        run(args)
    except (ValidationError, OSError) as e:
        logging.error(str(e))
        return EXIT_VALIDATION
    except NumericalError as e:
        logging.error(str(e))
        return EXIT_NUMERICAL

    return 0


if __name__ == "__main__":
    sys.exit(main())
