# Width laboratory
