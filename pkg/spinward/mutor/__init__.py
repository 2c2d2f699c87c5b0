"""
Multi-token prediction with register tokens, on a small numpy transformer.
"""
__version__ = '0.1'
