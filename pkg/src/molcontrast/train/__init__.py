"""Pre-training, fine-tuning, splits, optimisation and metrics."""
