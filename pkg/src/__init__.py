"""
mw-entropy-detector — Source package.

Modules:
    signal_model  — Recordings, filtering, epoching, on-disk dataset, synthetic generator
    entropy_bank  — Sample / permutation / dispersion / spectral / wavelet entropies
    feature_bank  — 424 named features per channel and the dataset feature matrix
    learn         — Random forest, baselines, metrics, LOSO and random search
    selection     — Channel ranking and RFE / IFE / CIFE feature selection
    pipeline      — Configuration and the cmd_* subcommand operations
    reporter      — YAML run reports, CSV curve tables and Excel summary
    errors        — Categorized exception hierarchy
"""

__version__ = "1.0.0"
