"""Emotion-aware, speech-synchronised gesture planning for the NAO humanoid."""

from .alignment import AlignmentPlan, plan_alignment, synthesize_trajectory
from .constraints import ConstraintSet, default_constraints, verify
from .emotion_input import EmotionSegment, Scenario, estimate_beta, read_scenario, speech_params
from .execution_sim import DeviationModel, run_ablation, run_closed_loop
from .joint_model import MotionSegment, parse_keyframe_script, serialize_keyframe_script
from .metrics import mean_angular_jerk, tsa
from .motion_library import build_index, load_library, semantic_search
from .planner import HttpProvider, PlanningError, ScriptedMock, plan_sequence
from .sync_monitor import MonitorConfig, SyncMonitor

__version__ = "0.1.0"

__all__ = [
    "AlignmentPlan",
    "ConstraintSet",
    "DeviationModel",
    "EmotionSegment",
    "HttpProvider",
    "MonitorConfig",
    "MotionSegment",
    "PlanningError",
    "Scenario",
    "ScriptedMock",
    "SyncMonitor",
    "build_index",
    "default_constraints",
    "estimate_beta",
    "load_library",
    "mean_angular_jerk",
    "parse_keyframe_script",
    "plan_alignment",
    "plan_sequence",
    "read_scenario",
    "run_ablation",
    "run_closed_loop",
    "semantic_search",
    "serialize_keyframe_script",
    "speech_params",
    "synthesize_trajectory",
    "tsa",
    "verify",
]
