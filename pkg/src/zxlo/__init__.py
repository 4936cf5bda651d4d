"""zxlo: a diagrammatic IR engine for photonic quantum protocols.

Layers:

- ``diagram`` / ``generators`` / ``wires``: typed term-tree IR mixing
  ZX-calculus spiders with linear-optical generators.
- ``interp`` / ``spaces`` / ``permanent``: dense Fock-space numeric
  interpretation with a permanent-based oracle for passive circuits.
- ``channel`` / ``exprs``: classically-annotated quantum channels
  (branch enumeration, feedforward, post-selection, determinism).
- ``flow``: Pauli-flow certificates, search, pattern synthesis and
  fusion networks with static flow.
- ``fusion``: linear-optical fusion measurements, Kraus branch tables
  and the normal-form classification.
- ``streams`` / ``modules`` / ``rus`` / ``arch``: synchronous dataflow
  streams, lattice/router/emitter modules, repeat-until-success
  protocols and desk-scale architecture checks.
- ``diagram_json`` / ``cli``: JSON wire formats and the command line.
"""

from .arch import ArchReport, boosted_merge_fusion, simulate_architecture
from .channel import (
    Annotation,
    ChannelDiagram,
    Branch,
    check_annotations,
    classify_determinism,
    coarse,
    enumerate_branches,
    feedforward,
    postselect,
)
from .diagram import (
    Diagram,
    Leaf,
    Par,
    Seq,
    dagger,
    identity,
    lower_dual_rail,
    par_all,
    permutation_diagram,
    seq_all,
    validate,
)
from .errors import ZxloError
from .flow import (
    Fusion,
    FusionNetwork,
    FlowCertificate,
    LabelledOpenGraph,
    find_pauli_flow,
    find_static_flow,
    synthesize_pattern,
    verify_flow,
)
from .fusion import (
    FusionSpec,
    GreenFusionParams,
    classify_fusion,
    fusion_kraus_branches,
    general_fusion_channel,
    green_fusion_channel,
    type_i_fusion_channel,
    type_ii_spec,
)
from .generators import (
    BeamSplitter,
    Hadamard,
    PhaseShift,
    PhotonDetect,
    PhotonPrep,
    QubitMeasure,
    QubitPrep,
    Scalar,
    XSpider,
    ZSpider,
)
from .interp import interpret, lo_transfer_matrix, operator_to_json, photon_budget
from .permanent import permanent_amplitude, ryser_permanent
from .rus import make_rus_protocol, rus_success_table, verify_rus_protocol
from .streams import ObjectSeq, StreamSpec, observational_equal, unroll
from .wires import DUALRAIL, MODE, QUBIT, Phase

__version__ = "0.1.0"
