# Localization services
