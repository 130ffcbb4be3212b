# Core modules for robust fair k-center clustering
