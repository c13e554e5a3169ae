"""Weekly plot-scale canopy transpiration from sap-flow probes, modelled
from Sentinel-2 band reflectance and station meteorology with a built-in
regression random forest."""

__version__ = "0.1.0"
