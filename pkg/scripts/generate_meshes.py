"""Regenerate the mesh files shipped under scenarios/meshes."""

from pathlib import Path

from ndfm.driver.meshgen import hydrocoin_mesh, unit_circle_mesh
from ndfm.mesh import save_mesh

OUT = Path(__file__).resolve().parent.parent / "scenarios" / "meshes"


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    targets = {
        "circle_conforming.mesh": unit_circle_mesh(20, 36),
        "hydrocoin_coarse.mesh": hydrocoin_mesh(42, 31),
        "hydrocoin_fine.mesh": hydrocoin_mesh(55, 41),
    }
    for name, mesh in targets.items():
        path = OUT / name
        path.write_text(save_mesh(mesh), encoding="utf-8")
        print(f"wrote {path} ({len(mesh.vertices)} vertices, {len(mesh.cells)} cells)")


if __name__ == "__main__":
    main()
