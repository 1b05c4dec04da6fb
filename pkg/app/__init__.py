# Spectral pencil lab - app package
