"""Visibility graphs, time-geometric forecasting, forecast metrics and
statistical comparison of forecasters (C++ core via pybind11)."""

from ._vistat import (
    DegenerateError,
    InputError,
    VisibilityGraph,
    VistatError,
    build_vg,
    build_vg_bruteforce,
    critical_value,
    degree_stats,
    denormalize,
    evaluate,
    evaluate_metrics,
    friedman,
    gen_random,
    gen_regular,
    gen_small_world,
    is_connected,
    is_visible,
    load_ohlcv,
    mae,
    mape,
    mase,
    nemenyi,
    nemenyi_q_alpha,
    paired_t,
    preset_config,
    presets,
    rank_matrix,
    rank_row,
    rmse,
    rolling_normalize,
    sign_test,
    split,
    train,
    wilcoxon,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
