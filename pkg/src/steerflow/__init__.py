"""Interactive steering stack for 2D lattice-Boltzmann flow.

Subpackages cover the solver core (lattice), coarse-to-fine budgeted runs
(hierarchy), BSP domain partitioning with halo exchange (partition), the
trader/slave work-stealing scheduler (scheduler), primitive extraction (viz),
sort-last image composition (compositor), the steering session and wire
protocol (server, protocol), and the manikin thermal coupling (thermal).
"""

__version__ = "0.1.0"
