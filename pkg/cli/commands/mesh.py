import logging
import sys

from cli.schemas.experiment import ExperimentConfig
from physics.geometry import SurfaceMesh, build_pair, check_watertight, euler_characteristic, mesh_pair, volume, write_off

logger = logging.getLogger(__name__)


def cmd_mesh(config: ExperimentConfig) -> SurfaceMesh:
    """Mesh the first configuration of the sweep and export it as OFF."""
    point = config.sweep_points()[0]
    upper, lower = config.bodies()
    pair = build_pair(upper, lower, point.eps)
    mesh = mesh_pair(pair, config.level, grading=config.grading, depth=config.depth)

    lines = [f"eps={point.eps:.17g} panels={mesh.n_panels} min_diameter={mesh.min_diameter:.6g}"]
    for tag, body in ((1, upper), (2, lower)):
        check_watertight(mesh, tag)
        lines.append(
            f"body {tag}: panels={int(mesh.mask(tag).sum())} euler={euler_characteristic(mesh, tag)} "
            f"volume={volume(mesh, tag):.10g} exact={body.exact_volume():.10g}"
        )
    sys.stdout.write("\n".join(lines) + "\n")

    if config.out is not None:
        config.out.parent.mkdir(parents=True, exist_ok=True)
        path = write_off(mesh, config.out.with_suffix(".off"))
        logger.info("Wrote mesh to %s", path)
    return mesh
