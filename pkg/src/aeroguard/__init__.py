"""aeroguard: quadrotor fault detection and crash-cause identification.

A self-contained toolkit that simulates quadrotor fault-injection flights,
detects anomalous sensor windows with a convolutional bi-LSTM autoencoder
scored by Mahalanobis distance, and identifies which rotors failed with a
convolutional bi-LSTM classifier.  Built on a small taped reverse-mode
differentiation engine over numpy arrays.

The usual entry points:

    flightsim.run_campaign     batch fault-injection simulation
    datapipe.segment           windowing, labeling, normalization, splits
    detector.train_detector    autoencoder training on normal windows
    scorer.fit_gaussian        Mahalanobis anomaly scoring and ROC
    classifier.train_classifier  crash-cause identification
    checkpoint.save_checkpoint   binary model persistence
    cli.main                   the `aeroguard` command
"""

from . import (  # noqa: F401
    checkpoint,
    classifier,
    cli,
    config,
    datapipe,
    detector,
    errors,
    flightsim,
    layers,
    optim,
    scorer,
    tensor,
)

__version__ = "0.1.0"
