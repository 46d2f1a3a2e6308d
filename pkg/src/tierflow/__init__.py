"""tierflow: stepwise training of interaction classifiers across label-confidence tiers."""

__version__ = "0.1.0"
