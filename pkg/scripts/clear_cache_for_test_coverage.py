import contextlib
import os
import shutil

os.chdir(os.path.dirname(os.path.dirname(os.path.realpath(__file__))))

for cache in ('.pytest_cache', '.hypothesis',
              os.path.join('qrlfolio', '__pycache__'), os.path.join('tests', '__pycache__')):
    shutil.rmtree(cache, ignore_errors=True)

with contextlib.suppress(OSError):
    os.remove('.coverage')
