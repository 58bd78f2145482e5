# Static catalogues
