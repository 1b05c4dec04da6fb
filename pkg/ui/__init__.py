# Static SVG output
