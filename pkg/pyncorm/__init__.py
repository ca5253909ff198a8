import pyncorm.datamodel
from pyncorm.cv.main import lps_cross_validation
from pyncorm.fit.main import fit, run_chain
from pyncorm.load.main import ingest_csv, load_archive
from pyncorm.predict.main import predict, predictive_density
from pyncorm.sampler.geweke import geweke_check
from pyncorm.simulate.main import simulate_dataset
