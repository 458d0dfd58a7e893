"""peerfl: a deterministic discrete-event simulator for peer-to-peer federated
learning over simulated wireless networks."""

from .adversary import AdversaryKind, AdversarySpec, Phase, flip_labels, fgsm_perturb, poison_update
from .config import (ConfigError, SimConfig, build_topology, parse_config, preset_config,
                     render_config, validate)
from .flcore import (AggregationKind, AggregationStrategy, DeviceProfile, DeviceState,
                     EarlyStopDaemon, SimulationResult, aggregate, build_problem,
                     compute_time, early_stop, effective_batch, gossip_select,
                     init_seed, on_receive, run_simulation, shard_split, train_seed)
from .kernel import EventKind, Kernel, SimEvent, StopFlag
from .learning import (Compression, Dataset, EvalMetrics, ModelParams, ModelShape,
                       TrainConfig, deserialize, evaluate, init_model, loss_and_grad,
                       serialize, train)
from .metrics import EventType, MetricsLog, MetricsRecord, RunSummary, summarize, write_metrics
from .net import (AccessPoint, ChannelState, LossMode, Message, Position, TopologyGraph,
                  associate, link_rate, path_loss_db, route, transfer_time)

__version__ = "0.1.0"
