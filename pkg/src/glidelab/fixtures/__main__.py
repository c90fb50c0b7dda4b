from . import write_csv

print(write_csv())
