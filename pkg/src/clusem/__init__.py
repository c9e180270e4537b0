"""Source-guided deep clustering with semantic attribute recovery.

Library layout:

    nn          dense layer primitives + finite-difference oracle
    data        dataset IO and synthetic generation
    model       encoder/decoder/semantic head and centroids
    losses      all loss terms with analytic gradients
    clustering  K-means, pseudo labels, cluster-to-class permutation
    train       Adam, pretraining, and full-objective training
    inference   threshold-based seen/unseen prediction
    metrics     classification and semantic-recovery accuracies
    report      matplotlib figures for run reports
    cli         command line entry point (clusem synth/train/eval/predict)
"""

__version__ = "0.1.0"
