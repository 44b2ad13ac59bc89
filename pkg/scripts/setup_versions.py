import os
import re
import subprocess  # nosec
import sys
import time

os.chdir(os.path.dirname(
    os.path.dirname(os.path.realpath(__file__))
))

version = subprocess.check_output([sys.executable,  # nosec
                                   os.path.join('scripts', 'find_version.py')],
                                  universal_newlines=True).strip()


def rewrite(path: str, rules: 'list[tuple[str, str]]') -> None:
    """Replace every line matching one of ``rules`` (pattern, replacement)."""
    context = []
    with open(path, encoding='utf-8') as file:
        for line in file:
            for pattern, replacement in rules:
                if re.match(pattern, line):
                    line = replacement
                    break
            context.append(line)
    with open(path, 'w', encoding='utf-8') as file:
        file.writelines(context)


rewrite(os.path.join('share', 'qrlfolio.rst'), [
    (r':Version: (.*)', ':Version: v%s\n' % version),
    (r':Date: (.*)', ':Date: %s\n' % time.strftime('%B %d, %Y')),
])
rewrite(os.path.join('docs', 'source', 'conf.py'), [
    (r'release = (.*)', 'release = %r\n' % version),
])
