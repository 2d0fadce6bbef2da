"""
dkmpc Data Collection

Random-actuation episodes: each episode resets a plant, then draws a uniform
command inside the plant's bounds and holds it for hold_steps ticks, recording
every transition.
"""

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Union

import numpy as np

from ..exceptions import ArgumentError, DkmpcError, PlantError
from ..plant import Plant, PlantConfig, SoftArmPlant
from ..utils import get_logger
from .dataset import Episode, EpisodeDataset

logger = get_logger(__name__)

PlantFactory = Callable[[int], Plant]


def soft_arm_factory(config: PlantConfig) -> PlantFactory:
    """Factory building one soft arm per episode, noise seeded with the episode seed."""
    def build(episode_seed: int) -> Plant:
        return SoftArmPlant(config.model_copy(update={"seed": episode_seed}))
    return build


def _collect_episode(plant: Plant, episode_id: int, steps: int, seed: int, hold_steps: int) -> Episode:
    rng = np.random.default_rng(seed)
    lo, hi = plant.control_bounds
    states = np.empty((steps + 1, plant.state_dim))
    controls = np.empty((steps, plant.control_dim))
    try:
        states[0] = plant.reset()
    except DkmpcError as exc:
        raise PlantError(f"reset failed: {exc.message}", episode=episode_id, step=0) from exc

    u = None
    for t in range(steps):
        if t % hold_steps == 0:
            u = rng.uniform(lo, hi)
        try:
            states[t + 1] = plant.step(u)
        except DkmpcError as exc:
            raise PlantError(exc.message, episode=episode_id, step=t) from exc
        controls[t] = u
    return Episode(episode_id, states, controls)


def collect_random_episodes(
    plant: Union[Plant, PlantFactory, PlantConfig],
    n_episodes: int,
    steps_per_episode: int,
    seed: int = 0,
    hold_steps: int = 5,
    workers: int = 1,
) -> EpisodeDataset:
    """
    Collect n_episodes random-actuation episodes.

    Episode i draws its commands from a generator seeded with seed + i, so the
    result does not depend on worker count. A shared Plant instance is only
    allowed with workers=1; pass a PlantConfig or factory to fan out.
    """
    if n_episodes < 0 or steps_per_episode < 0:
        raise ArgumentError("n_episodes and steps_per_episode must be non-negative")
    if hold_steps < 1:
        raise ArgumentError(f"hold_steps must be >= 1, got {hold_steps}")
    if workers < 1:
        raise ArgumentError(f"workers must be >= 1, got {workers}")

    if isinstance(plant, PlantConfig):
        factory = soft_arm_factory(plant)
    elif isinstance(plant, Plant):
        if workers > 1:
            raise ArgumentError("a single plant instance cannot be shared across workers")
        shared = plant
        factory = lambda _seed: shared  # noqa: E731
    else:
        factory = plant

    def run(episode_id: int) -> Episode:
        episode_seed = seed + episode_id
        episode = _collect_episode(factory(episode_seed), episode_id, steps_per_episode, episode_seed, hold_steps)
        logger.debug(f"Collected episode {episode_id} ({steps_per_episode} steps)")
        return episode

    if workers == 1 or n_episodes <= 1:
        episodes: List[Episode] = [run(i) for i in range(n_episodes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            # map preserves episode order
            episodes = list(pool.map(run, range(n_episodes)))

    dataset = EpisodeDataset(episodes)
    logger.info(f"Collected {n_episodes} episodes, {dataset.n_tuples} tuples")
    return dataset
