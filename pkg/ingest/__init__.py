# Ingest: pencil files in, CSV/JSON artifacts out
