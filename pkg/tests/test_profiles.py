import torch

from slotworld.models import InverseDynamics, full_profile


def test_full_profile_gridshapes_defaults():
    # Multi-object grid worlds: per-slot actions, five 8-dimensional prototypes.
    cfg = full_profile()
    assert cfg.dynamics.variant == "object"
    assert cfg.dynamics.action_dim == 8
    assert cfg.dynamics.n_prototypes == 5
    assert cfg.parser.slot_dim == 128
    assert cfg.parser.n_slots == 3


def test_full_profile_robot_settings_dims():
    # Single-agent settings: scene-level actions, eight 16-dim prototypes.
    torch.manual_seed(0)
    cfg = full_profile(variant="scene", action_dim=16, n_prototypes=8)
    inv = InverseDynamics(cfg.parser.slot_dim, cfg.dynamics)
    post = inv.posterior(torch.randn(2, 4, 128))
    assert post.mean.shape == (2, 16)
    assert post.sigma.shape == (2, 16)
    assert inv.codebook.n_prototypes == 8


def test_full_profile_transformer_dims():
    cfg = full_profile()
    assert cfg.predictor.token_dim == 256
    assert cfg.predictor.depth == 4
    assert cfg.predictor.heads == 8
    assert cfg.predictor.hidden == 1024
    assert cfg.dynamics.token_dim == 256
    assert cfg.dynamics.depth == 4
    assert cfg.dynamics.heads == 4
    assert cfg.policy.decoder_hidden == 128
