"""Command-line interface.

Batch commands (datagen/train/eval/behavior) run in-process against the
library; ``serve`` hosts the HTTP play API and ``play`` is a thin client that
drives a remote session and saves the returned frames.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import click
import numpy as np
import yaml

from .datagen.episodes import generate_episode, generate_expert_episode
from .datagen.shapes import GridConfig
from .datagen.storage import write_dataset


def _load_config_file(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith((".yaml", ".yml")):
        return yaml.safe_load(text)
    return json.loads(text)


@click.group()
def main() -> None:
    """Object-centric video prediction with latent actions."""


@main.command("datagen")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--episodes", "n_episodes", required=True, type=int)
@click.option("--seed", default=0, type=int, show_default=True)
@click.option("--out", "out_dir", required=True, type=click.Path())
def datagen_cmd(config_path: str, n_episodes: int, seed: int, out_dir: str) -> None:
    """Generate a dataset split from a generator config file."""
    spec = _load_config_file(config_path)
    expert = spec.pop("expert", False)
    action_noise = spec.pop("action_noise", 0.0)
    agent_index = spec.pop("agent_index", 0)
    config = GridConfig.from_dict(spec)
    if expert:
        episodes = [
            generate_expert_episode(config, seed=seed + i, agent_index=agent_index, action_noise=action_noise)
            for i in range(n_episodes)
        ]
    else:
        episodes = [generate_episode(config, seed=seed + i) for i in range(n_episodes)]
    write_dataset(out_dir, episodes)
    n_success = sum(getattr(e, "success", False) for e in episodes)
    click.echo(f"wrote {n_episodes} episodes to {out_dir}" + (f" ({n_success} successful)" if expert else ""))


@main.command("train")
@click.option("--stage", required=True, type=click.Choice(["parser", "dynamics", "policy"]))
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--resume", default=None, type=click.Path(exists=True))
@click.option("--base-model", default=None, type=click.Path(exists=True))
@click.option("--val", "val_dir", default=None, type=click.Path(exists=True))
def train_cmd(stage, config_path, data_dir, out_dir, resume, base_model, val_dir) -> None:
    """Run one training stage; writes model.ckpt and metrics.ndjson to --out."""
    from .training.loop import TrainConfig, build_world_config, train_stage

    spec = _load_config_file(config_path)
    train_spec = dict(spec.get("train", {}))
    train_spec["stage"] = stage
    config = TrainConfig(**train_spec)
    world_config = build_world_config(spec["model"]) if "model" in spec else None
    final = train_stage(
        stage,
        data_dir,
        out_dir,
        config,
        world_config=world_config,
        base_checkpoint=base_model,
        resume=resume,
        val_dir=val_dir,
    )
    click.echo(f"stage {stage} finished: {final}")


@main.group("eval")
def eval_group() -> None:
    """Evaluation harnesses; all write a JSON report."""


@eval_group.command("predict")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed-frames", default=6, show_default=True, type=int)
@click.option("--horizon", default=15, show_default=True, type=int)
@click.option("--action-source", default="invdyn_reference", show_default=True,
              type=click.Choice(["invdyn_reference", "zero", "user_script"]))
@click.option("--episodes", default=None, type=int)
@click.option("--seed", default=0, type=int)
def eval_predict_cmd(model_path, data_dir, out_path, seed_frames, horizon, action_source, episodes, seed) -> None:
    from .evaluation.harness import eval_prediction
    from .models.world import load_checkpoint

    model = load_checkpoint(model_path)
    report = eval_prediction(
        model,
        data_dir,
        n_seed=seed_frames,
        horizon=horizon,
        action_source=action_source,
        n_episodes=episodes,
        seed=seed,
        model_id=Path(model_path).stem,
    )
    Path(out_path).write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True))
    click.echo(f"mean PSNR {report.mean_psnr:.3f} dB, mean SSIM {report.mean_ssim:.4f} -> {out_path}")


@eval_group.command("scaling")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="JSON list of {n_objects, variant, model, data}.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed-frames", default=6, type=int)
@click.option("--horizon", default=15, type=int)
@click.option("--episodes", default=None, type=int)
def eval_scaling_cmd(spec_path, out_path, seed_frames, horizon, episodes) -> None:
    from .evaluation.harness import scaling_study
    from .models.world import load_checkpoint

    entries = json.loads(Path(spec_path).read_text())
    for entry in entries:
        entry["model"] = load_checkpoint(entry.pop("model"))
        entry["dataset"] = entry.pop("data")
    rows = scaling_study(entries, n_seed=seed_frames, horizon=horizon, n_episodes=episodes)
    Path(out_path).write_text(json.dumps(rows, indent=2, sort_keys=True))
    click.echo(f"wrote {len(rows)} scaling rows -> {out_path}")


@eval_group.command("ablation")
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True),
              help="JSON list of {label, model, data}.")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--seed-frames", default=6, type=int)
@click.option("--horizon", default=15, type=int)
@click.option("--episodes", default=None, type=int)
def eval_ablation_cmd(spec_path, out_path, seed_frames, horizon, episodes) -> None:
    from .evaluation.harness import ablation_table
    from .models.world import load_checkpoint

    entries = json.loads(Path(spec_path).read_text())
    for entry in entries:
        entry["model"] = load_checkpoint(entry.pop("model"))
        entry["dataset"] = entry.pop("data")
    rows = ablation_table(entries, n_seed=seed_frames, horizon=horizon, n_episodes=episodes)
    Path(out_path).write_text(json.dumps(rows, indent=2, sort_keys=True))
    click.echo(f"wrote {len(rows)} ablation rows -> {out_path}")


@eval_group.command("prototypes")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--horizon", default=15, type=int)
@click.option("--n-seed-frames", default=20, type=int, help="How many distinct seed frames to probe.")
@click.option("--seed", default=0, type=int)
def eval_prototypes_cmd(model_path, data_dir, out_path, horizon, n_seed_frames, seed) -> None:
    """Displacement-consistency analysis per action prototype."""
    from .evaluation.harness import prototype_consistency
    from .models.world import load_checkpoint
    from .training.data import EpisodeCache

    model = load_checkpoint(model_path)
    cache = EpisodeCache(data_dir)
    k = model.dynamics.codebook.n_prototypes
    results = []
    for proto in range(k):
        runs = []
        for i in range(min(n_seed_frames, cache.n_episodes)):
            frame = cache.episode_frames(i)[0]
            runs.append(prototype_consistency(model, proto, frame, horizon=horizon, seed=seed))
        directions = [r["direction"] for r in runs]
        majority = max(set(directions), key=directions.count)
        results.append(
            {
                "prototype": proto,
                "mean_score": float(np.mean([r["score"] for r in runs])),
                "majority_direction": majority,
                "majority_fraction": directions.count(majority) / len(directions),
                "runs": runs,
            }
        )
    Path(out_path).write_text(json.dumps(results, indent=2, sort_keys=True))
    for row in results:
        click.echo(
            f"prototype {row['prototype']}: score {row['mean_score']:.3f} "
            f"direction {row['majority_direction']} ({row['majority_fraction']:.0%})"
        )


@main.group("behavior")
def behavior_group() -> None:
    """Behavior learning from expert demos."""


@behavior_group.command("annotate")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--seed", default=0, type=int)
def behavior_annotate_cmd(model_path, data_dir, out_dir, seed) -> None:
    from .behavior.learning import annotate_demos, write_annotations
    from .models.world import load_checkpoint
    from .training.data import EpisodeCache

    model = load_checkpoint(model_path)
    demos = annotate_demos(model, EpisodeCache(data_dir), seed=seed)
    summary = write_annotations(demos, out_dir)
    usage_file = Path(model_path).with_suffix("").parent / (Path(model_path).stem + ".usage.json")
    usage_file.write_text(json.dumps(summary["prototype_usage"], indent=2, sort_keys=True))
    click.echo(f"annotated {summary['n_demos']} demos ({summary['n_transitions']} transitions) -> {out_dir}")


@behavior_group.command("train-policy")
@click.option("--base-model", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--steps", default=2000, type=int, show_default=True)
@click.option("--seed", default=0, type=int)
def behavior_train_policy_cmd(base_model, data_dir, out_dir, steps, seed) -> None:
    from .training.loop import default_train_config, train_stage

    config = default_train_config("policy", steps, seed=seed, batch_size=64)
    final = train_stage("policy", data_dir, out_dir, config, base_checkpoint=base_model)
    click.echo(f"policy stage finished: {final}")


@behavior_group.command("train-decoder")
@click.option("--base-model", required=True, type=click.Path(exists=True))
@click.option("--data", "data_dir", required=True, type=click.Path(exists=True))
@click.option("--out", "out_dir", required=True, type=click.Path())
@click.option("--steps", default=1000, type=int, show_default=True)
@click.option("--labeled-episodes", default=50, type=int, show_default=True)
@click.option("--seed", default=0, type=int)
def behavior_train_decoder_cmd(base_model, data_dir, out_dir, steps, labeled_episodes, seed) -> None:
    from .training.loop import default_train_config, train_stage

    config = default_train_config(
        "policy", steps, seed=seed, batch_size=64, labeled_episodes=labeled_episodes
    )
    final = train_stage("policy", data_dir, out_dir, config, base_checkpoint=base_model)
    click.echo(f"decoder training finished: {final}")


@behavior_group.command("eval")
@click.option("--model", "model_paths", required=True, multiple=True, type=click.Path(exists=True),
              help="Repeat for independently trained seeds.")
@click.option("--env-config", "env_config_path", required=True, type=click.Path(exists=True))
@click.option("--protocol", required=True, type=click.Choice(["imagination", "simulation"]))
@click.option("--episodes", default=100, show_default=True, type=int)
@click.option("--horizon", default=20, show_default=True, type=int)
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_path", required=True, type=click.Path())
def behavior_eval_cmd(model_paths, env_config_path, protocol, episodes, horizon, seed, out_path) -> None:
    from .behavior.protocols import evaluate_protocol
    from .models.world import load_checkpoint

    models = [load_checkpoint(p) for p in model_paths]
    env_config = GridConfig.from_dict(_load_config_file(env_config_path))
    name = "latent_imagination" if protocol == "imagination" else "simulation"
    report = evaluate_protocol(models, name, env_config, episodes, horizon, seed=seed)
    Path(out_path).write_text(json.dumps(report, indent=2, sort_keys=True))
    click.echo(f"{protocol}: rate {report['rate']:.3f} +/- {report['stddev']:.3f} -> {out_path}")


@main.group("codebook")
def codebook_group() -> None:
    """Inspect learned action prototypes."""


@codebook_group.command("dump")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", default=None, type=click.Path())
def codebook_dump_cmd(model_path, out_path) -> None:
    from .models.world import load_checkpoint

    model = load_checkpoint(model_path)
    cb = model.dynamics.codebook
    payload = {
        "k": cb.n_prototypes,
        "d_z": cb.dim,
        "prototypes": [p.tolist() for p in cb.prototypes],
        "usage_counts": cb.usage.tolist(),
    }
    text = json.dumps(payload, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(text)
        click.echo(f"wrote codebook -> {out_path}")
    else:
        click.echo(text)


@main.command("serve")
@click.option("--config", "config_path", default=None, type=click.Path(exists=True))
@click.option("--host", default=None)
@click.option("--port", default=None, type=int)
def serve_cmd(config_path, host, port) -> None:
    """Host the HTTP/JSON play API."""
    import uvicorn

    from .service.app import create_app
    from .service.config import ServiceConfig

    config = ServiceConfig.load(config_path)
    if host:
        config.host = host
    if port:
        config.port = port
    uvicorn.run(create_app(config), host=config.host, port=config.port)


@main.command("play")
@click.option("--server", required=True, help="Base URL of a running play service.")
@click.option("--checkpoint", "checkpoint_id", required=True)
@click.option("--mode", default="user", type=click.Choice(["user", "policy", "reference"]))
@click.option("--seed-frame", "seed_frame_path", default=None, type=click.Path(exists=True))
@click.option("--episode-dir", default=None, type=click.Path(exists=True))
@click.option("--episode-id", default=0, type=int)
@click.option("--prototypes", default="", help="Comma-separated prototype indices for user mode.")
@click.option("--steps", default=None, type=int, help="Step count for policy/reference modes.")
@click.option("--seed", default=0, type=int)
@click.option("--out", "out_dir", required=True, type=click.Path())
def play_cmd(server, checkpoint_id, mode, seed_frame_path, episode_dir, episode_id, prototypes, steps, seed, out_dir) -> None:
    """Thin client: create a session, step it, save the returned frames."""
    import httpx

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    body: dict = {"mode": mode, "checkpoint_id": checkpoint_id, "seed": seed}
    if seed_frame_path:
        body["seed_frame_b64"] = base64.b64encode(Path(seed_frame_path).read_bytes()).decode("ascii")
    if episode_dir:
        body["episode"] = {"dataset_dir": episode_dir, "episode_id": episode_id}
    with httpx.Client(base_url=server, timeout=60.0) as client:
        resp = client.post("/v1/sessions", json=body)
        resp.raise_for_status()
        session = resp.json()
        (out / "frame_000.png").write_bytes(base64.b64decode(session["frame_b64"]))
        actions = [int(x) for x in prototypes.split(",") if x != ""]
        n_steps = len(actions) if mode == "user" else (steps or 10)
        for i in range(n_steps):
            step_body = {"prototype_index": actions[i]} if mode == "user" else {}
            step = client.post(f"/v1/sessions/{session['session_id']}/step", json=step_body)
            step.raise_for_status()
            data = step.json()
            (out / f"frame_{data['step_index']:03d}.png").write_bytes(base64.b64decode(data["frame_b64"]))
        client.delete(f"/v1/sessions/{session['session_id']}")
    click.echo(f"saved {n_steps + 1} frames to {out}")


if __name__ == "__main__":
    main()
