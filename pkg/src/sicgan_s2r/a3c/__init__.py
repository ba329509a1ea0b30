"""Asynchronous advantage actor-critic for the image reach task."""
from .agent import A3CAgent, load_eval_set, save_eval_set, write_curve_csv
from .losses import RolloutBuffer, a3c_loss, categorical_entropy, n_step_returns
from .network import ActorCritic, PolicyNetSpec, obs_to_tensor
from .optim import SharedRMSprop
from .workers import TrainConfig, TrainResult, Worker, interim_evaluate, make_eval_set, run_episode, train_a3c
