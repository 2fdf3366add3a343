import os
import sys

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")

sys.path.insert(0, os.path.dirname(__file__))
