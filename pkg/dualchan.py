#!/usr/bin/env python3
"""
dualchan - Dual quantum channel simulation toolkit.

Simulates the transpose, complex conjugate and adjoint of unknown quantum
channels, estimates Petz recovery functionals and certifies the optimal
sampling overhead of the conjugation comb.
"""

import sys
import os

# Make the backend and cli packages importable when the script is installed
# to /usr/local/bin with the modules under /usr/local/share/dualchan
script_dir = os.path.dirname(os.path.abspath(__file__))

if script_dir == "/usr/local/bin":
    install_dir = "/usr/local/share/dualchan"
    if os.path.isdir(install_dir) and install_dir not in sys.path:
        sys.path.insert(0, install_dir)
elif os.path.isdir(os.path.join(script_dir, "cli")) and os.path.isdir(os.path.join(script_dir, "backend")):
    if script_dir not in sys.path:
        sys.path.insert(0, script_dir)

from cli.commands import run


class DualChanApp:
    """Command-line application."""

    def __init__(self, argv=None):
        self.argv = sys.argv[1:] if argv is None else argv

    def run(self):
        """Run the selected subcommand and return its exit code."""
        return run(self.argv)


def main():
    """Main entry point."""
    app = DualChanApp()
    sys.exit(app.run())


if __name__ == "__main__":
    main()
