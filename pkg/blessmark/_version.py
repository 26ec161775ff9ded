"""Single runtime source of truth for the package version.

Default is a dev placeholder; release builds overwrite this file with the
tagged version before packaging.
"""

__version__ = "0.0.0+dev"
