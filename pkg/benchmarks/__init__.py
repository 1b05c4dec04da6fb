# Acceptance battery: property criteria and runner for the spectral-pencil lab.
