# Command-line front end for dualchan
