"""The Lagrangian cone: symplectic structure, reconstruction, big J and invariant tables."""

from .bigj import BigJ, SigmaError, SigmaResult, big_J, sigma_extract, sigma_map
from .pipelines import (JEpsilon, MirrorSmall, cor4_check, infinity_chamber_check, j_epsilon,
                        mirror_small, routes_check, selection_check, sigma_check,
                        string_dilaton_check, transport_check)
from .reconstruction import (CompletenessError, ConePoint, Orders, ReconstructionError,
                             RegularityReport, reconstruct, regularity_check)
from .symplectic import (BroadComponentError, dilaton_shift, omega_pairing, polarization,
                         undo_dilaton_shift)
from .tables import (InconsistentTableError, InvariantTable, OutOfRangeError, TableRange,
                     compare_tables, read_off)
