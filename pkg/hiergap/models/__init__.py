# Domain types, report models and errors
