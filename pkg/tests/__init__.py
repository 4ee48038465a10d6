# Tests package for TrajKernel
