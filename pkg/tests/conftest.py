# Makes the sibling helpers module importable from every test file.
