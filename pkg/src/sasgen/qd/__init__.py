"""Archives, CMA-ES and quality-diversity emitters."""
from .archive import (PRESETS, Archive, ArchiveSpec, Elite, add_cma_mae, add_map_elites,
                      cell_coords, cell_index, qd_score, unravel)
from .cmaes import CMAES
from .emitters import (CmaMaeEmitter, CmaMaegaEmitter, emitter_cma_mae_step,
                       emitter_cma_maega_step, map_elites_ask, normalize_rows, random_search_ask)

__all__ = [
    "PRESETS", "Archive", "ArchiveSpec", "CMAES", "CmaMaeEmitter", "CmaMaegaEmitter", "Elite",
    "add_cma_mae", "add_map_elites", "cell_coords", "cell_index", "emitter_cma_mae_step",
    "emitter_cma_maega_step", "map_elites_ask", "normalize_rows", "qd_score",
    "random_search_ask", "unravel",
]
