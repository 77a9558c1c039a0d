"""Build the eddyperm API reference with pdoc.

Run from the project root with the dev extra installed:
```bash
python docs/make.py            # write docs/docs/
python docs/make.py --clean    # wipe docs/docs/ first
python docs/make.py --serve    # live server instead of files
```
"""

from typing import Optional
from pathlib import Path
import argparse
import shutil
import subprocess
import webbrowser
from loguru import logger
from eddyperm import util


OUTPUT_DIR = Path("docs") / "docs"
PACKAGE_PATH = Path("eddyperm")
# Docstrings carry α, μr and inline LaTeX, hence --math
PDOC_ARGS = ("--docformat", "google", "--math", "--footer-text", "eddyperm")


def build(
    output_dir: Optional[Path] = OUTPUT_DIR,
    *,
    clean: bool = False,
    open_browser: bool = False,
) -> int:
    """Run pdoc over the package and return its exit status.

    Args:
        output_dir: Folder for the generated html. None runs the pdoc server.
        clean: Remove *output_dir* before building.
        open_browser: Open the index page (or the server) when done.
    """
    args = ["pdoc", str(PACKAGE_PATH), *PDOC_ARGS]
    if output_dir is not None:
        if clean and output_dir.is_dir():
            logger.info(f"Removing {output_dir}")
            shutil.rmtree(output_dir)
        util.file_dump(output_dir / ".gitignore", "**\n")
        args.extend(["--output-directory", str(output_dir)])
    if not open_browser:
        args.append("--no-browser")
    logger.info(f"Running: {' '.join(args)}")
    status = subprocess.run(args).returncode
    if status:
        logger.error(f"pdoc exited with status {status}")
    elif output_dir is not None and open_browser:
        webbrowser.open((output_dir / "index.html").resolve().as_uri())
    return status


def main() -> int:
    parser = argparse.ArgumentParser(description="Build the eddyperm API reference.")
    parser.add_argument("--clean", action="store_true", help="remove old docs first")
    parser.add_argument("--open", action="store_true", help="open the docs in a browser")
    parser.add_argument("--serve", action="store_true", help="run the pdoc server")
    args = parser.parse_args()
    output_dir = None if args.serve else OUTPUT_DIR
    return build(output_dir, clean=args.clean, open_browser=args.open)


if __name__ == "__main__":
    raise SystemExit(main())
