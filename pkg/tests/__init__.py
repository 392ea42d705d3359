# Tests package for sintail
