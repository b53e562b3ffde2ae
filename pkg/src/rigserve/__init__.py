"""rigserve: a renderer-agnostic real-time facial rig server.

Named bone controls, action-unit and viseme presets, layered
expression/lip-sync blending, a phoneme-timeline scheduler, AU-stream
retargeting, and a newline-delimited JSON control protocol with a
fixed-rate frame broadcast.
"""

__version__ = "0.1.0"
