# -*- coding: utf-8 -*-
"""Quantum and classical reinforcement learning for dynamic portfolio optimization.

The package simulates parameterized quantum circuits exactly on dense
statevectors, trains DDPG and DQN agents whose actor and critic are either
circuits or small MLPs, and scores them by walk-forward backtesting against
equal-weight and mean-variance baselines.

"""

# version string
__version__ = '0.1.0.dev0'
