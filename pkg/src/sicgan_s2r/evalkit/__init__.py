"""Evaluation: reach accuracy, greedy protocols, histogram distances, heatmaps, trajectories."""
from .evaluation import EvalReport, post_training_eval, summarize, workspace_sweep, write_report
from .heatmap import Heatmap, build_heatmap, nearest_fill, save_heatmap, success_map_arrays
from .metrics import accuracy, channel_distances, rgb_histograms, wasserstein_1d
from .trajectories import export_trajectories, plot_trajectories, trajectory_records
