"""Event-stream denoising toolkit: dual-sampling ground-truth generation,
a dynamic-threshold spiking denoiser, classical baseline filters, a
behavioral event-camera simulator, metrics and a CLI."""

from .core import (Geometry, Event, EventStream, LabeledEventStream,
                   BinaryFrame, WindowSequence, window_partition, binarize,
                   events_at_pixels, merge_streams, NEG, POS,
                   LABEL_NOISE, LABEL_SIGNAL, LABEL_UNLABELED)
from .evio import read_events, write_events, load_manifest, save_manifest, iterate_pairs
from .simulator import (Scene, PixelModelParams, NoiseParams, DualStream,
                        render_signal_events, sample_ba_noise, dual_sample)
from .ded import (DedParams, spatial_similarity, correlation_stat,
                  correlation_filter, ded_pipeline)
from .filters import (DensityParams, RowColParams, TimeSurfaceParams,
                      density_filter, rowcol_filter, timesurface_filter)
from .metrics import (DenoiseReport, denoise_accuracy, overlap_rate,
                      mean_overlap_rate, blank_patch_ratio, preservation_rate,
                      event_snr)

__version__ = "0.1.0"
