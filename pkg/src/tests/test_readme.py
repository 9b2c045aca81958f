import contextlib
import io
import os
import re

import six


def test_run():
	# run the >>> lines of each python block in README.md
	# and compare what they print with the lines that follow
	parent_dir = os.path.dirname(os.path.dirname(os.path.dirname(__file__)))
	with open(os.path.join(parent_dir, 'README.md')) as f:
		content = f.read()

	python_blocks = re.findall(r'```python\n(.*?)\n```', content, re.DOTALL)
	assert python_blocks

	namespace = {}
	for block in python_blocks:
		chunk = []
		expected = []
		for line in block.split('\n'):
			if line.startswith('>>> ') or line.startswith('... '):
				chunk.append(line[4:] + '\n')
			elif line.strip():
				expected.append(line.strip())

		code = ''.join(chunk)
		print('running::\n' + code)
		output = io.StringIO()
		with contextlib.redirect_stdout(output):
			six.exec_(code, namespace)
		printed = [line.strip() for line in output.getvalue().split('\n') if line.strip()]
		assert printed == expected, (printed, expected)
