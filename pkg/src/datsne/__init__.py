"""Direction-aware t-SNE: 2-D embeddings of temporal data whose arrows
between consecutive time points stay short and locally coherent."""

from .affinity import AffinityMatrix, build_affinities, calibrate_bandwidth, pairwise_sq_distances
from .dal import (DalParams, adaptive_sigma, coherence_score, dcl_loss_grad, ell_loss_grad,
                  segment_distance)
from .ingest import (TimeSeriesTable, ToyConfig, generate_cyclic_clusters, load_highdim_csv,
                     load_timeseries_csv, sliding_window)
from .model import (DaTsneConfig, Dataset, EmbeddingState, TemporalGraph, validate_dataset,
                    validate_graph)
from .tsne import LossTrace, OptimizerSchedule, init_embedding, kl_gradient, optimize

__version__ = "0.1.0"
