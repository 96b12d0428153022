"""Procedural dungeon worlds with geometric metadata as first-class content.

The generator emits a connected dungeon graph annotated with planes, volumes,
height maps and portals, and the runtime subsystems built on that metadata:
NPC motion AI, a tracing third-person camera planned over layered occupancy
grids, a dynamic portal-based visible set, and a lightmap baker.
"""

__version__ = "0.1.0"
