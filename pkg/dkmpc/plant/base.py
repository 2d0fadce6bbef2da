"""
dkmpc Plant Base Classes

Abstract interface every simulated plant implements so data collection and
closed-loop tracking run against any of them.
"""

from abc import ABC, abstractmethod

import numpy as np


class Plant(ABC):
    """
    Abstract base class for plants.

    A plant owns its internal state exclusively; one closed-loop run drives
    one plant instance.
    """

    @property
    @abstractmethod
    def state_dim(self) -> int:
        """Dimension of the observation"""
        pass

    @property
    @abstractmethod
    def control_dim(self) -> int:
        """Dimension of the command"""
        pass

    @property
    @abstractmethod
    def control_bounds(self):
        """(lower, upper) raw command bounds"""
        pass

    @abstractmethod
    def reset(self) -> np.ndarray:
        """
        Return the plant to its initial state.

        Returns:
            The initial observation
        """
        pass

    @abstractmethod
    def observe(self) -> np.ndarray:
        """Most recent observation"""
        pass

    @abstractmethod
    def step(self, u: np.ndarray) -> np.ndarray:
        """
        Apply one command for one tick.

        Args:
            u: Raw command vector

        Returns:
            The observation after the tick
        """
        pass
