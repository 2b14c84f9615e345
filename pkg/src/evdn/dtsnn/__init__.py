from .lif import (LifParams, lif_step, spike_fn, smooth_spike,
                  surrogate_spike_grad, TH_MIN, TH_MAX)
from .network import DTSNN, ForwardResult, op_count, EDB_CHANNELS, DTB_CHANNELS
from .train import (TrainConfig, stream_frames, make_threshold_labels,
                    build_samples, train_step, fit, predict_stream,
                    TH_LOW, TH_HIGH)
from .checkpoint import save_checkpoint, load_checkpoint, CheckpointError
