# This file makes 'core' a sub-package of 'airsindy'.
