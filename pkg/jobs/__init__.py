# Empty __init__.py files for proper Python module structure
