"""recstudy: a desk-scale, self-hostable live music-recommendation study platform."""

__version__ = "0.1.0"
