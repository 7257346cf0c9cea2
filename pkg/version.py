__version__ = "1.0.0"

# carried by every scenario file, CSV row and JSON summary
SCHEMA_VERSION = "udkf-scenario/1"
