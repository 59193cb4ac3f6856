"""Planar simulators for teleoperation and shared-workspace collaboration."""
from .belief import belief_update, teleop_advantages, uniform
from .collab import CollabConfig, human_q_tables, min_goal_distance, simulate_collab
from .mdp import GridMDP, next_cell, softmax_value_iteration
from .occupancy import occupancy_grid
from .outcome import SimOutcome
from .policies import (feasible_goal_sets, goal_to_go_map, goal_weights, human_action_collab,
                       human_action_teleop, robot_action_collab, robot_action_teleop_blend,
                       robot_action_teleop_shared, teleop_waypoints)
from .teleop import NOISE_CAP, TeleopConfig, simulate_teleop, teleop_measures

__all__ = [
    "CollabConfig", "GridMDP", "NOISE_CAP", "SimOutcome", "TeleopConfig", "belief_update",
    "feasible_goal_sets", "goal_to_go_map", "goal_weights", "human_action_collab",
    "human_action_teleop", "human_q_tables", "min_goal_distance", "next_cell", "occupancy_grid",
    "robot_action_collab", "robot_action_teleop_blend", "robot_action_teleop_shared",
    "simulate_collab", "simulate_teleop", "softmax_value_iteration", "teleop_advantages",
    "teleop_measures", "teleop_waypoints", "uniform",
]
