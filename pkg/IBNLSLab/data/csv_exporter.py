import pandas as pd

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.17g"


class CSVExporter:
    @staticmethod
    def export(dataframe: pd.DataFrame, path: str, schema: str):
        with open(path, "w", encoding="utf-8", newline="") as f:
            f.write(f"# ibnls-{schema} v{SCHEMA_VERSION}\n")
            dataframe.to_csv(f, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")

    @staticmethod
    def load(path: str) -> pd.DataFrame:
        with open(path, "r", encoding="utf-8") as f:
            tagged = f.readline().startswith("# ibnls-")
        return pd.read_csv(path, skiprows=1 if tagged else 0, float_precision="round_trip")
