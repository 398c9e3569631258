"""Finite-difference checks of the full pre-training and change-detection losses."""
import logging

import numpy as np

from autograd.gradcheck import GradCheckReport, finite_diff_check
from config import RunConfig, SynthConfig, get_preset
from imaging.synth import synth_cd_pair, synth_scene
from pretext.network import init_cd_head, init_encoder, init_pretrain_params
from pretext.objective import batch_loss
from training.finetune import CDModel, cd_loss
from training.pretrain import prepare_batch

logger = logging.getLogger(__name__)

CHECK_SIZE = 16


def _scenes(seed: int, count: int) -> list[tuple[np.ndarray, np.ndarray]]:
    rng = np.random.default_rng([seed, 101])
    cfg = SynthConfig(size=CHECK_SIZE, min_buildings=1, max_buildings=2, min_side=5)
    return [synth_scene(rng, cfg) for _ in range(count)]


def pretrain_gradcheck(seed: int = 0, config: RunConfig | None = None, samples: int = 200) -> GradCheckReport:
    """Check the total pre-training loss on two 16×16 scenes with the configured preset."""
    config = config or RunConfig()
    preset = get_preset(config.train.preset)
    batch = prepare_batch(_scenes(seed, 2), seed, config)
    params = init_pretrain_params(np.random.default_rng(seed), preset)

    def loss_fn(watched):
        return batch_loss(batch.triplets, batch.plans, watched, config.train, ds=preset.ds).total

    return finite_diff_check(loss_fn, params, samples=samples, seed=seed)


def cd_gradcheck(seed: int = 0, config: RunConfig | None = None, samples: int = 200) -> GradCheckReport:
    config = config or RunConfig()
    preset = get_preset(config.train.preset)
    rng = np.random.default_rng([seed, 202])
    cfg = SynthConfig(size=CHECK_SIZE, min_side=5, max_buildings=2)
    pairs = [synth_cd_pair(rng, cfg) for _ in range(2)]
    params = init_encoder(np.random.default_rng(seed), preset)
    params.update(init_cd_head(np.random.default_rng([seed, 1]), preset, std=0.2))
    model = CDModel(params=params, stats=None, preset=preset)
    return finite_diff_check(lambda watched: cd_loss(model, watched, pairs), params, samples=samples, seed=seed)
