"""
Download functionality for extended modular polynomial tables.
"""

import gzip
import logging
from pathlib import Path
from typing import Callable, Optional

import requests
from tqdm import tqdm

from . import config
from .exceptions import DownloadError, ModularPolynomialError
from .modpoly import ModularPolyTable, check_modular_polynomial, parse_table

logger = logging.getLogger(__name__)


class TableDownloader:
    """Fetches Phi_m tables into the cache directory of a ModularPolyTable."""

    def __init__(self, table: ModularPolyTable, url_template: Optional[str] = None):
        self.table = table
        self.url_template = url_template or config.get("modular.table_url")
        self.download_dir = table.cache_dir
        self.download_dir.mkdir(parents=True, exist_ok=True)

    def url_for(self, m: int) -> str:
        return self.url_template.format(level=m)

    def download_file(self, url: str, filename: str, progress_callback: Optional[Callable] = None) -> Path:
        """Download a file with progress tracking."""
        file_path = self.download_dir / filename

        try:
            response = requests.get(url, stream=True, timeout=60)
            response.raise_for_status()

            total_size = int(response.headers.get("content-length", 0))

            with open(file_path, "wb") as f:
                if total_size > 0:
                    with tqdm(total=total_size, unit="B", unit_scale=True, desc=filename) as pbar:
                        for chunk in response.iter_content(chunk_size=8192):
                            if chunk:
                                f.write(chunk)
                                pbar.update(len(chunk))
                                if progress_callback:
                                    progress_callback(pbar.n, total_size)
                else:
                    for chunk in response.iter_content(chunk_size=8192):
                        if chunk:
                            f.write(chunk)

            return file_path

        except requests.RequestException as e:
            if file_path.exists():
                file_path.unlink()
            raise DownloadError(f"Failed to download {url}: {e}")

    def fetch(self, m: int, force: bool = False, progress_callback: Optional[Callable] = None) -> Path:
        """
        Download Phi_m and store it as ``phi_j_<m>.txt`` (or ``.txt.gz``).

        The file is parsed and checked for symmetry and degree before it is
        kept; a table that fails the check is removed.

        Raises:
            DownloadError: If the transfer fails
            ModularPolynomialError: If the downloaded table is malformed
        """
        url = self.url_for(m)
        suffix = ".txt.gz" if url.endswith(".gz") else ".txt"
        target = self.download_dir / f"phi_j_{m}{suffix}"
        if target.exists() and not force:
            logger.info("Phi_%d already present at %s", m, target)
            return target

        partial = self.download_file(url, target.name + ".part", progress_callback)
        try:
            raw = partial.read_bytes()
            if suffix.endswith(".gz"):
                raw = gzip.decompress(raw)
            check_modular_polynomial(m, parse_table(raw.decode("ascii"), m))
        except (ModularPolynomialError, UnicodeDecodeError, OSError) as e:
            partial.unlink()
            raise ModularPolynomialError(f"downloaded Phi_{m} failed validation: {e}")

        partial.replace(target)
        self.table.forget(m)
        logger.info("stored Phi_%d at %s", m, target)
        return target
